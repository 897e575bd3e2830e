#!/usr/bin/env python3
"""Empirical competitive-ratio sweep over random single-good instances.

For each drawn instance, runs the benchmark -> policy -> closed-form
evaluation pipeline for several (benchmark, w-rule, capacity) variants
and reports the worst observed reward/objective ratio per variant next
to its proven floor. Optionally cross-checks a subsample by simulation.

Usage: python3 scripts/competitive_sweep.py --n 500 --seed 0 \
           [--simulate 5 --horizon 1e6] [--out sweep.csv]
"""

import argparse
import math

import numpy as np

from spimarket.lp import Benchmark, solve
from spimarket.model import BuyerTypeSpec, GoodSpec, MarketInstance
from spimarket.policy import WRule, analytic_sale_rates, build
from spimarket.sim import simulate_policy

VARIANTS = [
    # label, benchmark, w-rule, capacity, proven floor on the ratio
    ("lp-off/pasta/C=2", Benchmark.LP_OFF, WRule.PASTA, 2, 0.5),
    ("lp-on/online/C=1", Benchmark.LP_ON, WRule.ONLINE, 1, 0.5),
    ("lp-on/online/C=3", Benchmark.LP_ON, WRule.ONLINE, 3, 0.647887323944),
    ("lp-on/online/C=5", Benchmark.LP_ON, WRule.ONLINE, 5, 0.656606631099),
    ("rb-off/collina/C=unbounded", Benchmark.RB_OFF, WRule.COLLINA_MIN, None,
     1.0 - 1.0 / (math.e - 1.0)),
]


def draw_instance(rng):
    m = int(rng.integers(1, 6))
    return MarketInstance(
        (GoodSpec(rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0)),),
        tuple(BuyerTypeSpec(rng.uniform(0.1, 5.0), (rng.uniform(0.1, 5.0),))
              for _ in range(m)))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--simulate", type=int, default=0,
                        help="also simulate the worst instance of each "
                             "variant this many times 0=off")
    parser.add_argument("--horizon", type=float, default=1e6)
    parser.add_argument("--out", help="per-instance ratios as CSV")
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    instances = [draw_instance(rng) for _ in range(args.n)]
    solutions = {}
    for bench in {v[1] for v in VARIANTS}:
        solutions[bench] = [solve(inst, bench) for inst in instances]

    lines = ["variant,instance,ratio"]
    print(f"{'variant':<28} {'min ratio':>10} {'floor':>10} {'margin':>10}")
    for label, bench, rule, cap, floor in VARIANTS:
        ratios = []
        for k, inst in enumerate(instances):
            sol = solutions[bench][k]
            capped = inst.with_capacity(cap)
            policy = build(capped, sol, 1.0, rule)
            _, reward = analytic_sale_rates(capped, policy)
            ratios.append(reward / sol.objective)
            lines.append("%s,%d,%.12g" % (label, k, ratios[-1]))
        ratios = np.array(ratios)
        worst = int(ratios.argmin())
        print(f"{label:<28} {ratios.min():>10.6f} {floor:>10.6f} "
              f"{ratios.min() - floor:>10.2e}")
        if args.simulate:
            inst = instances[worst].with_capacity(cap)
            policy = build(inst, solutions[bench][worst], 1.0, rule)
            rewards = [simulate_policy(inst, policy, args.horizon,
                                       seed=args.seed + 31 * r).reward_rate
                       for r in range(args.simulate)]
            obj = solutions[bench][worst].objective
            print(f"  worst instance #{worst} simulated ratio: "
                  f"{np.mean(rewards) / obj:.6f} over {args.simulate} reps")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
