import json
import os

import numpy as np
import pytest

from spimarket.cli import main
from spimarket.model import (
    dump_instance,
    three_good_demo_instance,
    unit_gap_instance,
)
from spimarket.policy import policy_from_json_dict


@pytest.fixture(scope="module")
def unit_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("inst") / "unit.json"
    dump_instance(unit_gap_instance(), path)
    return str(path)


@pytest.fixture(scope="module")
def demo_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("inst") / "demo.json"
    dump_instance(three_good_demo_instance(capacity=2), path)
    return str(path)


def test_solve_writes_plan(unit_file, tmp_path, capsys):
    out = str(tmp_path / "plan.csv")
    assert main(["solve", "--instance", unit_file, "--benchmark", "lp-off",
                 "--out", out]) == 0
    text = open(out).read()
    assert text.startswith("good,buyer,x\n")
    assert "objective,0.632120558" in text
    assert "status=optimal" in capsys.readouterr().out


def test_solve_unknown_benchmark_is_usage_error(unit_file, capsys):
    assert main(["solve", "--instance", unit_file, "--benchmark", "nope"]) == 2
    capsys.readouterr()


def test_missing_instance_file_is_usage_error(capsys):
    assert main(["solve", "--instance", "/does/not/exist.json"]) == 2
    capsys.readouterr()


def test_policy_json_round_trips_through_cli(unit_file, tmp_path, capsys):
    out = str(tmp_path / "pol.json")
    assert main(["policy", "--instance", unit_file, "--alpha", "0.75",
                 "--out", out]) == 0
    assert "posted price" in capsys.readouterr().out
    data = json.load(open(out))
    policy = policy_from_json_dict(data, unit_gap_instance())
    assert policy.alpha == 0.75
    assert np.allclose(policy.sale_probabilities, [[0.75]])


def test_eval_reports_ratio(unit_file, tmp_path, capsys):
    out = str(tmp_path / "rates.csv")
    assert main(["eval", "--instance", unit_file, "--out", out]) == 0
    printed = capsys.readouterr().out
    assert "analytic reward rate: 0.418023" in printed
    assert "ratio=0.661303" in printed
    assert open(out).read().startswith("good,buyer,s\n")


def test_eval_multi_good_rejected(demo_file, capsys):
    assert main(["eval", "--instance", demo_file]) == 2
    assert "error:" in capsys.readouterr().err


def test_simulate_with_policy_file(unit_file, tmp_path, capsys):
    pol = str(tmp_path / "pol.json")
    rep = str(tmp_path / "rep.csv")
    assert main(["policy", "--instance", unit_file, "--out", pol]) == 0
    rc = main(["simulate", "--instance", unit_file, "--policy", pol,
               "--horizon", "5e3", "--seed", "1", "--out", rep])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "consistency checks:" in printed
    assert "[pass]" in printed
    assert open(rep).read().startswith("good,buyer,s_hat,stderr\n")


def test_simulate_multi_good_runs_dominance(demo_file, tmp_path, capsys):
    rep = str(tmp_path / "rep.csv")
    rc = main(["simulate", "--instance", demo_file, "--alpha", "0.75",
               "--horizon", "2e4", "--seed", "2", "--out", rep])
    assert rc == 0
    assert "dominance checks:" in capsys.readouterr().out


def test_simulate_capacity_override(unit_file, tmp_path, capsys):
    rep = str(tmp_path / "rep.csv")
    rc = main(["simulate", "--instance", unit_file, "--capacity", "1",
               "--horizon", "5e3", "--seed", "3", "--out", rep])
    assert rc == 0
    capsys.readouterr()
    assert main(["simulate", "--instance", unit_file, "--capacity", "0"]) == 2
    capsys.readouterr()


def test_compete_is_deterministic_and_threaded(unit_file, tmp_path, capsys,
                                               monkeypatch):
    monkeypatch.setenv("SPI_THREADS", "2")
    out_a = str(tmp_path / "a.csv")
    out_b = str(tmp_path / "b.csv")
    args = ["compete", "--instance", unit_file, "--horizon", "2e3",
            "--reps", "3", "--seed", "7"]
    assert main(args + ["--out", out_a]) == 0
    assert main(args + ["--out", out_b]) == 0
    capsys.readouterr()
    assert open(out_a).read() == open(out_b).read()
    text = open(out_a).read()
    assert text.startswith("quantity,value\n")
    assert "analytic_reward,0.418023" in text
    assert text.count("\n0,") + text.count("\n1,") + text.count("\n2,") >= 3


def test_compete_bad_threads_env(unit_file, capsys, monkeypatch):
    monkeypatch.setenv("SPI_THREADS", "lots")
    assert main(["compete", "--instance", unit_file, "--horizon", "1e3",
                 "--reps", "2"]) == 2
    capsys.readouterr()


def test_table2_csv(tmp_path, capsys):
    out = str(tmp_path / "t.csv")
    assert main(["table2", "--cmax", "3", "--out", out]) == 0
    capsys.readouterr()
    lines = open(out).read().splitlines()
    assert lines[0] == "capacity,lower,upper"
    assert lines[1] == "1,0.5,0.5"
    assert lines[2].startswith("2,0.615384615385")
    assert lines[-1].startswith("unbounded,0.656767260246")


def test_hardness_csv(tmp_path, capsys):
    out = str(tmp_path / "h.csv")
    assert main(["hardness", "--eps", "0.001", "--out", out]) == 0
    capsys.readouterr()
    lines = open(out).read().splitlines()
    assert lines[0] == "eps,offline_lower,online_upper,ratio"
    ratio = float(lines[1].split(",")[3])
    assert 0.5 < ratio < 0.5005


def test_verify_bounds_pass_and_perturb(tmp_path, capsys):
    out = str(tmp_path / "v.csv")
    assert main(["verify-bounds", "--points", "200", "--out", out]) == 0
    assert all(line.endswith(",pass") for line in
               open(out).read().splitlines()[1:])
    assert main(["verify-bounds", "--points", "200", "--perturb", "-0.01",
                 "--out", out]) == 1
    text = open(out).read()
    assert ",fail" in text
    capsys.readouterr()


def test_offline_oracle(unit_file, tmp_path, capsys):
    out = str(tmp_path / "o.csv")
    rc = main(["offline-oracle", "--instance", unit_file, "--horizon", "2e3",
               "--reps", "2", "--seed", "5", "--out", out])
    assert rc == 0
    assert "hindsight value rate" in capsys.readouterr().out
    lines = open(out).read().splitlines()
    assert lines[0] == "quantity,value"
    assert lines[3] == "rep,seed,value_rate,matched_rate,n_components"
    assert len(lines) == 6


def test_no_temp_files_left(unit_file, tmp_path):
    out = str(tmp_path / "plan.csv")
    assert main(["solve", "--instance", unit_file, "--out", out]) == 0
    leftovers = [f for f in os.listdir(tmp_path) if f.startswith(".spi-")]
    assert leftovers == []


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()
    assert main([]) == 2
    capsys.readouterr()
