#!/usr/bin/env python3
"""Regenerate the headline result tables into an output directory.

Runs the capacity guarantee table, the relaxation gaps on the two
built-in gap instances, the scarce-supply hardness sweep, and the
closed-form bound audit. Everything is deterministic; rerunning
overwrites the CSVs in place.

Usage: python3 scripts/reproduce_headline_tables.py [--out-dir results]
"""

import argparse
import os
import sys

from spimarket.cli import main as spi


def run(argv):
    print("+ spi " + " ".join(argv))
    rc = spi(argv)
    if rc != 0:
        sys.exit(rc)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--points", type=int, default=10000,
                        help="grid size for the bound audit")
    args = parser.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)
    out = lambda name: os.path.join(args.out_dir, name)

    run(["table2", "--cmax", "5", "--out", out("capacity_guarantees.csv")])
    run(["gaps", "--lam", "1000", "--out", out("relaxation_gaps.csv")])
    run(["hardness", "--eps", "0.1", "0.01", "0.001",
         "--out", out("hardness.csv")])
    run(["verify-bounds", "--points", str(args.points),
         "--out", out("bound_audit.csv")])
    print(f"tables written to {args.out_dir}/")


if __name__ == "__main__":
    main()
