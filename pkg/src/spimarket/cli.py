"""Command line driver for the market model.

Subcommands cover the full pipeline (solve a benchmark, build a permit
policy, evaluate it analytically or by simulation) plus the standalone
tables: capacity guarantees, relaxation gaps on the built-in gap
instances, the scarce-supply hardness sweep, and a numeric audit of the
closed-form bounds.

Exit codes: 0 ok, 1 a statistical or bound check failed, 2 bad usage or
bad input, 3 numeric trouble in the solver. Output files are written
atomically (tmp file + rename) and are still written when a check
fails, so a failing run leaves its evidence behind.
"""

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lp import Benchmark, STATUS_OPTIMAL, SimplexError, gap_report, solve
from .model import (
    InstanceError,
    fast_perish_gap_instance,
    load_instance,
    scarce_supply_instance,
    unit_gap_instance,
)
from .policy import (
    IncompatiblePairingError,
    NotPostedPriceError,
    PolicySpec,
    WRule,
    analytic_sale_rates,
    build,
    policy_from_json_dict,
    to_posted_price,
)
from .queueing import (
    ChainError,
    W_REGIME_SPLIT,
    availability_bounds,
    availability_probability,
    availability_to_w_floor,
    half_competitive_floor,
    ratio_floor_large_w,
    ratio_floor_small_w,
)
from .sim import (
    conservation_check,
    dominance_check,
    pasta_check,
    simulate_offline_matching,
    simulate_policy,
)

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

_KEEP = object()  # sentinel: keep the instance file's capacity


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".spi-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_capacity(text):
    if text.lower() in ("unbounded", "none", "inf"):
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"capacity must be a positive integer or 'unbounded', got {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError("capacity must be positive")
    return value


def _thread_count(reps):
    env = os.environ.get("SPI_THREADS", "")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        raise InstanceError(f"SPI_THREADS must be an integer, got {env!r}")
    return max(1, min(reps, cap))


@dataclass(frozen=True)
class ExperimentConfig:
    horizon: float
    burn_in: float  # nan means the per-instance default
    reps: int
    seed: int
    n_batches: int

    @classmethod
    def from_args(cls, args):
        reps = getattr(args, "reps", 1)
        if reps < 1:
            raise InstanceError("reps must be at least 1")
        return cls(horizon=args.horizon,
                   burn_in=math.nan if args.burn_in is None else args.burn_in,
                   reps=reps,
                   seed=args.seed,
                   n_batches=args.batches)

    @property
    def burn_in_or_none(self):
        return None if math.isnan(self.burn_in) else self.burn_in

    def rep_seeds(self):
        return [int(s) for s in
                np.random.SeedSequence(self.seed).generate_state(self.reps, np.uint64)]


def _load(args):
    inst = load_instance(args.instance)
    if getattr(args, "capacity", _KEEP) is not _KEEP:
        inst = inst.with_capacity(args.capacity)
    return inst


def _build_policy(inst, args):
    solution = solve(inst, Benchmark(args.benchmark))
    if solution.status != STATUS_OPTIMAL:
        raise SimplexError(f"benchmark solve ended with status {solution.status}: "
                           f"{solution.diagnostics}")
    return solution, build(inst, solution, args.alpha, WRule(args.w_rule))


def _policy_from_args(inst, args):
    if args.policy is not None:
        try:
            with open(args.policy) as fh:
                data = json.load(fh)
        except ValueError as exc:
            raise InstanceError(f"policy file is not valid JSON: {exc}")
        return None, policy_from_json_dict(data, inst)
    return _build_policy(inst, args)


def _print_rows(rows, heading):
    print(heading)
    for r in rows:
        print(f"  {r.label}: observed={r.observed:.6g} reference={r.reference:.6g} "
              f"slack={r.slack:.3g} [{r.status}]")


# --- subcommands -------------------------------------------------------------

def cmd_solve(args):
    inst = _load(args)
    solution = solve(inst, Benchmark(args.benchmark))
    print(f"benchmark={args.benchmark} status={solution.status} "
          f"objective={solution.objective:.12g} iterations={solution.iterations}")
    if args.out:
        _atomic_write(args.out, solution.to_csv())
    if solution.status != STATUS_OPTIMAL:
        print(f"diagnostics: {solution.diagnostics}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_policy(args):
    inst = _load(args)
    _, policy = _build_policy(inst, args)
    print(f"alpha={policy.alpha} w={np.array2string(policy.w, precision=6)} "
          f"permitted={np.array2string(policy.permitted_rates, precision=6)}")
    try:
        posted = to_posted_price(policy, inst)
        print(f"posted price: threshold={posted.threshold_value:.12g} "
              f"boundary_p={posted.boundary_probability:.12g}")
    except NotPostedPriceError:
        pass
    if args.out:
        _atomic_write(args.out, json.dumps(policy.to_json_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_eval(args):
    inst = _load(args)
    solution, policy = _policy_from_args(inst, args)
    rates, reward = analytic_sale_rates(inst, policy)
    print(f"analytic reward rate: {reward:.12g}")
    if solution is not None:
        print(f"benchmark objective: {solution.objective:.12g} "
              f"ratio={reward / solution.objective:.6g}")
    if args.out:
        lines = ["good,buyer,s"]
        for i in range(rates.rates.shape[0]):
            for j in range(rates.rates.shape[1]):
                lines.append("%d,%d,%.17g" % (i, j, rates.rates[i, j]))
        lines.append("reward_rate,%.17g" % reward)
        _atomic_write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_simulate(args):
    inst = _load(args)
    config = ExperimentConfig.from_args(args)
    _, policy = _policy_from_args(inst, args)
    report = simulate_policy(inst, policy, config.horizon,
                             burn_in=config.burn_in_or_none, seed=config.seed,
                             n_batches=config.n_batches)
    print(f"reward rate: {report.reward_rate:.6g} +/- {report.reward_stderr:.2g}")
    rows = pasta_check(report) + conservation_check(inst, report)
    _print_rows(rows, "consistency checks:")
    if inst.n_goods >= 2 and isinstance(policy, PolicySpec):
        dom = dominance_check(inst, policy, report=report)
        _print_rows(dom, "dominance checks:")
        rows += dom
    if args.out:
        _atomic_write(args.out, report.to_csv())
    return EXIT_CHECK if any(r.status == "fail" for r in rows) else EXIT_OK


def cmd_compete(args):
    inst = _load(args)
    config = ExperimentConfig.from_args(args)
    solution, policy = _build_policy(inst, args)
    lines = ["quantity,value"]
    lines.append("objective,%.17g" % solution.objective)
    print(f"benchmark={args.benchmark} objective={solution.objective:.12g}")
    if inst.n_goods == 1:
        _, analytic = analytic_sale_rates(inst, policy)
        lines.append("analytic_reward,%.17g" % analytic)
        lines.append("analytic_ratio,%.17g" % (analytic / solution.objective))
        print(f"analytic reward={analytic:.12g} "
              f"ratio={analytic / solution.objective:.6g}")
    seeds = config.rep_seeds()
    with ThreadPoolExecutor(max_workers=_thread_count(config.reps)) as pool:
        reports = list(pool.map(
            lambda s: simulate_policy(inst, policy, config.horizon,
                                      burn_in=config.burn_in_or_none, seed=s,
                                      n_batches=config.n_batches), seeds))
    rewards = np.array([r.reward_rate for r in reports])
    mean = float(rewards.mean())
    if config.reps >= 2:
        stderr = float(rewards.std(ddof=1)) / math.sqrt(config.reps)
    else:
        stderr = reports[0].reward_stderr
    lines.append("mean_reward,%.17g" % mean)
    lines.append("stderr,%.17g" % stderr)
    lines.append("ratio,%.17g" % (mean / solution.objective))
    lines.append("rep,seed,reward,stderr")
    for k, (s, rep) in enumerate(zip(seeds, reports)):
        lines.append("%d,%d,%.17g,%.17g" % (k, s, rep.reward_rate, rep.reward_stderr))
    print(f"simulated reward={mean:.6g} +/- {stderr:.2g} "
          f"ratio={mean / solution.objective:.6g} ({config.reps} reps)")
    if args.out:
        _atomic_write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_table2(args):
    lines = ["capacity,lower,upper"]
    print("capacity  lower     upper")
    for c in range(1, args.cmax + 1):
        lower = min(ratio_floor_small_w(c, W_REGIME_SPLIT),
                    ratio_floor_large_w(c, 1.0))
        upper = c / (c + 1.0)
        lines.append("%d,%.12g,%.12g" % (c, lower, upper))
        print(f"{c:>8d}  {lower:.6f}  {upper:.6f}")
    lower = min(ratio_floor_small_w(None, W_REGIME_SPLIT),
                ratio_floor_large_w(None, 1.0))
    lines.append("unbounded,%.12g,1" % lower)
    print(f"unbounded  {lower:.6f}  1.000000")
    if args.out:
        _atomic_write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_gaps(args):
    instances = [("unit", unit_gap_instance()),
                 ("fast-perish", fast_perish_gap_instance(args.lam))]
    lines = ["instance,quantity,value"]
    for name, inst in instances:
        report = gap_report(inst)
        print(f"[{name}] offline_ratio={report.offline_ratio:.6g} "
              f"online_ratio={report.online_ratio:.6g}")
        for row in report.to_csv().splitlines()[1:]:
            lines.append(f"{name},{row}")
    if args.out:
        _atomic_write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_hardness(args):
    lines = ["eps,offline_lower,online_upper,ratio"]
    print("eps       offline>=   online<=    ratio")
    for eps in args.eps:
        if eps <= 0:
            raise InstanceError("eps must be positive")
        inst = scarce_supply_instance(eps)
        solution = solve(inst, Benchmark.LP_ON)
        if solution.status != STATUS_OPTIMAL:
            raise SimplexError(f"hardness solve failed: {solution.diagnostics}")
        online_upper = solution.objective
        # feasible hindsight strategy, plentiful-low-buyer limit: reserve
        # items for the rare high-value buyers (stationary availability at
        # consumption rate eps is at least 1 - exp(-eps/(1+eps))) and sell
        # every remaining item to a low buyer before it perishes
        offline_lower = eps - math.expm1(-eps / (1.0 + eps))
        ratio = online_upper / offline_lower
        lines.append("%.12g,%.17g,%.17g,%.17g"
                     % (eps, offline_lower, online_upper, ratio))
        print(f"{eps:<9.4g} {offline_lower:<11.6g} {online_upper:<11.6g} {ratio:.6f}")
    if args.out:
        _atomic_write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_verify_bounds(args):
    if args.points < 10:
        raise InstanceError("need at least 10 grid points")
    z = np.geomspace(1e-6, 1e3, args.points)
    x = np.linspace(1e-6, 1.0, args.points)
    checks = []

    worst = min(half_competitive_floor(v) - 0.5 for v in z)
    checks.append(("half_floor_ge_half", worst))
    worst = min(availability_to_w_floor(v, 0.75, 2) - 4.0 / 7.0 for v in z)
    checks.append(("damped_floor_ge_four_sevenths", worst))
    for cap in (1, 2, 3, None):
        name = "unbounded" if cap is None else str(cap)
        f = np.array([ratio_floor_small_w(cap, v) for v in x])
        checks.append((f"small_w_floor_nonincreasing_c{name}",
                       float((f[:-1] - f[1:]).min())))
        g = np.array([ratio_floor_large_w(cap, v) for v in x])
        checks.append((f"large_w_floor_nonincreasing_c{name}",
                       float((g[:-1] - g[1:]).min())))
    worst = math.inf
    for cap in (1, 3, None):
        for v in z:
            lo, hi = availability_bounds(v, 1.0, v, cap)
            mid = availability_probability(v, 1.0, v, cap)
            worst = min(worst, mid - lo, hi - mid)
    checks.append(("availability_sandwich", worst))

    lines = ["check,points,worst_slack,status"]
    failed = False
    print("bound checks:")
    for name, slack in checks:
        slack += args.perturb
        ok = slack >= -1e-12
        failed = failed or not ok
        status = "pass" if ok else "fail"
        lines.append("%s,%d,%.17g,%s" % (name, args.points, slack, status))
        print(f"  {name}: worst slack {slack:.3g} [{status}]")
    if args.out:
        _atomic_write(args.out, "\n".join(lines) + "\n")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_offline_oracle(args):
    inst = _load(args)
    config = ExperimentConfig.from_args(args)
    seeds = config.rep_seeds()
    with ThreadPoolExecutor(max_workers=_thread_count(config.reps)) as pool:
        reports = list(pool.map(
            lambda s: simulate_offline_matching(inst, config.horizon, seed=s,
                                                n_batches=config.n_batches),
            seeds))
    values = np.array([r.value_rate for r in reports])
    mean = float(values.mean())
    if config.reps >= 2:
        stderr = float(values.std(ddof=1)) / math.sqrt(config.reps)
    else:
        stderr = reports[0].value_stderr
    print(f"hindsight value rate: {mean:.6g} +/- {stderr:.2g} "
          f"({config.reps} reps, horizon {config.horizon:g})")
    lines = ["quantity,value",
             "mean_value_rate,%.17g" % mean,
             "stderr,%.17g" % stderr,
             "rep,seed,value_rate,matched_rate,n_components"]
    for k, (s, rep) in enumerate(zip(seeds, reports)):
        lines.append("%d,%d,%.17g,%.17g,%d"
                     % (k, s, rep.value_rate, rep.matched_rate, rep.n_components))
    if args.out:
        _atomic_write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def _add_instance_arg(sub):
    sub.add_argument("--instance", required=True, help="instance JSON file")
    sub.add_argument("--capacity", type=_parse_capacity, default=_KEEP,
                     help="override capacity: positive integer or 'unbounded'")


def _add_build_args(sub):
    sub.add_argument("--benchmark", choices=[b.value for b in Benchmark],
                     default=Benchmark.LP_OFF.value)
    sub.add_argument("--w-rule", choices=[w.value for w in WRule],
                     default=WRule.PASTA.value)
    sub.add_argument("--alpha", type=float, default=1.0)


def _add_sim_args(sub):
    sub.add_argument("--horizon", type=float, default=1e5)
    sub.add_argument("--burn-in", type=float, default=None)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--batches", type=int, default=20)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spi",
        description="benchmarks, permit policies, and simulation for the "
                    "stationary perishable-goods market")
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("solve", help="solve one benchmark relaxation")
    _add_instance_arg(s)
    s.add_argument("--benchmark", choices=[b.value for b in Benchmark],
                   default=Benchmark.LP_OFF.value)
    s.add_argument("--out", help="write the plan as CSV")
    s.set_defaults(func=cmd_solve)

    s = subs.add_parser("policy", help="build a permit policy from a benchmark plan")
    _add_instance_arg(s)
    _add_build_args(s)
    s.add_argument("--out", help="write the policy as JSON")
    s.set_defaults(func=cmd_policy)

    s = subs.add_parser("eval", help="closed-form policy evaluation (single good)")
    _add_instance_arg(s)
    _add_build_args(s)
    s.add_argument("--policy", help="policy JSON (skips the build step)")
    s.add_argument("--out", help="write sale rates as CSV")
    s.set_defaults(func=cmd_eval)

    s = subs.add_parser("simulate", help="simulate a policy and run consistency checks")
    _add_instance_arg(s)
    _add_build_args(s)
    s.add_argument("--policy", help="policy JSON (skips the build step)")
    _add_sim_args(s)
    s.add_argument("--out", help="write the simulation report as CSV")
    s.set_defaults(func=cmd_simulate)

    s = subs.add_parser("compete", help="solve, build, and simulate in one go")
    _add_instance_arg(s)
    _add_build_args(s)
    _add_sim_args(s)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--out", help="write per-rep and aggregate results as CSV")
    s.set_defaults(func=cmd_compete)

    s = subs.add_parser("table2", help="capacity guarantee table")
    s.add_argument("--cmax", type=int, default=5)
    s.add_argument("--out")
    s.set_defaults(func=cmd_table2)

    s = subs.add_parser("gaps", help="relaxation gaps on the built-in gap instances")
    s.add_argument("--lam", type=float, default=1e3,
                   help="supply rate for the fast-perish instance")
    s.add_argument("--out")
    s.set_defaults(func=cmd_gaps)

    s = subs.add_parser("hardness", help="scarce-supply hardness sweep")
    s.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.01, 0.001])
    s.add_argument("--out")
    s.set_defaults(func=cmd_hardness)

    s = subs.add_parser("verify-bounds", help="grid audit of the closed-form bounds")
    s.add_argument("--points", type=int, default=10000)
    s.add_argument("--perturb", type=float, default=0.0,
                   help="offset added to every slack; nonzero values are for "
                        "testing that failures are caught")
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify_bounds)

    s = subs.add_parser("offline-oracle", help="hindsight matching benchmark")
    _add_instance_arg(s)
    _add_sim_args(s)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_offline_oracle)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except (InstanceError, ChainError, IncompatiblePairingError,
            NotPostedPriceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimplexError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
