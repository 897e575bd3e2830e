"""Benchmark LPs over long-run sale rates x[i, j].

Every benchmark shares the flow constraints: sales of good i cannot exceed
its supply rate, sales to type j cannot exceed its arrival rate, and a
(good, buyer) pair cannot turn over items faster than gamma_j * lambda_i /
mu_i.  Online benchmarks add a coupled row per pair that charges the drain
of committed sales against supply; availability-capped benchmarks add the
cap x[i, j] <= gamma_j * (1 - e^{-lambda_i/mu_i}) that any policy watching
a stationary inventory must respect.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import InstanceError, MarketInstance, SaleRateMatrix, is_canonical
from .queueing import availability_probability
from .simplex import SimplexError, simplex_maximize

FEAS_TOL = 1e-9

STATUS_OPTIMAL = "optimal"
STATUS_NUMERIC = "infeasible-numeric"


class Benchmark(enum.Enum):
    RB_OFF = "rb-off"
    RB_ON = "rb-on"
    LP_OFF = "lp-off"
    LP_ON = "lp-on"

    @property
    def online(self) -> bool:
        return self in (Benchmark.RB_ON, Benchmark.LP_ON)

    @property
    def availability_capped(self) -> bool:
        return self in (Benchmark.LP_OFF, Benchmark.LP_ON)


@dataclass(frozen=True)
class ConstraintSystem:
    """Rows of matrix @ x <= rhs over the flattened x[i*m + j] variables,
    nonnegativity included as explicit -x <= 0 rows for auditability."""
    matrix: np.ndarray
    rhs: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        r = np.asarray(self.rhs, dtype=float)
        m.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "rhs", r)
        object.__setattr__(self, "labels", tuple(self.labels))

    def violations(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float).ravel() - self.rhs

    def max_violation(self, x: np.ndarray) -> tuple[float, str]:
        v = self.violations(x)
        k = int(np.argmax(v))
        return float(v[k]), self.labels[k]


def build_constraints(inst: MarketInstance, benchmark: Benchmark) -> ConstraintSystem:
    n, m = inst.n_goods, inst.n_buyers
    lam = inst.supply_rates()
    mu = inst.perish_rates()
    gamma = inst.arrival_rates()
    nm = n * m

    rows, rhs, labels = [], [], []

    def idx(i, j):
        return i * m + j

    for i in range(n):
        r = np.zeros(nm)
        r[i * m:(i + 1) * m] = 1.0
        rows.append(r)
        rhs.append(lam[i])
        labels.append(f"supply[{i}]")
    for j in range(m):
        r = np.zeros(nm)
        r[j::m] = 1.0
        rows.append(r)
        rhs.append(gamma[j])
        labels.append(f"demand[{j}]")
    for i in range(n):
        for j in range(m):
            r = np.zeros(nm)
            r[idx(i, j)] = 1.0
            rows.append(r)
            rhs.append(gamma[j] * lam[i] / mu[i])
            labels.append(f"turnover[{i},{j}]")
    if benchmark.online:
        # x_ij <= gamma_j (lambda_i - sum_l x_il)/mu_i, linearized
        for i in range(n):
            for j in range(m):
                r = np.zeros(nm)
                r[i * m:(i + 1) * m] = gamma[j]
                r[idx(i, j)] += mu[i]
                rows.append(r)
                rhs.append(gamma[j] * lam[i])
                labels.append(f"online[{i},{j}]")
    if benchmark.availability_capped:
        for i in range(n):
            cap = -math.expm1(-lam[i] / mu[i])
            for j in range(m):
                r = np.zeros(nm)
                r[idx(i, j)] = 1.0
                rows.append(r)
                rhs.append(gamma[j] * cap)
                labels.append(f"availability[{i},{j}]")
    for i in range(n):
        for j in range(m):
            r = np.zeros(nm)
            r[idx(i, j)] = -1.0
            rows.append(r)
            rhs.append(0.0)
            labels.append(f"nonneg[{i},{j}]")

    return ConstraintSystem(np.array(rows), np.array(rhs), tuple(labels))


@dataclass(frozen=True)
class LpSolution:
    rates: SaleRateMatrix
    objective: float
    status: str
    benchmark: Benchmark | None = None
    diagnostics: str = ""
    iterations: int = 0

    def to_csv(self) -> str:
        lines = ["good,buyer,x"]
        arr = self.rates.rates
        for i in range(arr.shape[0]):
            for j in range(arr.shape[1]):
                if arr[i, j] > 0.0:
                    lines.append(f"{i},{j},{arr[i, j]:.17g}")
        lines.append(f"objective,{self.objective:.17g}")
        return "\n".join(lines) + "\n"


def solve(inst: MarketInstance, benchmark: Benchmark) -> LpSolution:
    """Maximize expected reward rate sum v_ij x_ij over the benchmark's
    feasible sale rates.  x = 0 is always feasible, so the outcome is either
    optimal or a numeric failure."""
    n, m = inst.n_goods, inst.n_buyers
    gamma = inst.arrival_rates()
    values = inst.value_matrix()
    active = np.flatnonzero(gamma > 0.0)  # zero-rate types are fixed at x = 0

    x = np.zeros((n, m))
    if active.size == 0:
        return LpSolution(SaleRateMatrix(x), 0.0, STATUS_OPTIMAL, benchmark)

    sub = MarketInstance(inst.goods,
                         tuple(inst.buyers[j] for j in active),
                         inst.capacity)
    system = build_constraints(sub, benchmark)
    solver_rows = [k for k, lab in enumerate(system.labels) if not lab.startswith("nonneg")]
    a = system.matrix[solver_rows]
    b = system.rhs[solver_rows]
    c = values[:, active].ravel()

    try:
        x_sub, _, iters = simplex_maximize(c, a, b)
    except SimplexError as exc:
        return LpSolution(SaleRateMatrix(x), 0.0, STATUS_NUMERIC, benchmark,
                          diagnostics=str(exc))

    x[:, active] = x_sub.reshape(n, active.size)
    worst, label = build_constraints(inst, benchmark).max_violation(x)
    if worst > FEAS_TOL:
        return LpSolution(SaleRateMatrix(np.zeros((n, m))), 0.0, STATUS_NUMERIC,
                          benchmark, diagnostics=f"violates {label} by {worst:.3g}",
                          iterations=iters)
    rates = SaleRateMatrix(x)
    objective = float((values * rates.rates).sum())
    return LpSolution(rates, objective, STATUS_OPTIMAL, benchmark, iterations=iters)


def solve_single_good_greedy(inst: MarketInstance, w: float) -> LpSolution:
    """Greedy for a canonicalized single-good instance: serve types in value
    order at per-type cap gamma_j * w until the supply rate is exhausted.

    With w = 1 - e^{-lambda/mu} this reproduces the availability-capped
    offline benchmark exactly; the general simplex stays authoritative and
    this serves as an independent cross-check and policy front-end.
    """
    if not is_canonical(inst):
        raise InstanceError("greedy solver needs a canonicalized single-good instance")
    if not (0.0 < w <= 1.0):
        raise InstanceError(f"w must be in (0, 1], got {w}")
    lam = inst.goods[0].supply_rate
    gamma = inst.arrival_rates()
    values = inst.value_matrix()[0]
    x = np.zeros(inst.n_buyers)
    budget = lam
    for j in range(inst.n_buyers):
        take = min(gamma[j] * w, budget)
        x[j] = take
        budget -= take
        if budget <= 0.0:
            break
    rates = SaleRateMatrix(x[None, :])
    return LpSolution(rates, float(values @ x), STATUS_OPTIMAL,
                      diagnostics="greedy")


@dataclass(frozen=True)
class GapReport:
    rb_off: float
    rb_on: float
    lp_off: float
    lp_on: float
    offline_ratio: float           # lp_off / rb_off
    online_ratio: float            # lp_on / rb_on
    sell_all_reward: float | None  # single-good: permit-everyone exact reward
    sell_all_offline_ratio: float | None
    sell_all_online_ratio: float | None

    def to_csv(self) -> str:
        lines = ["quantity,value"]
        for name in ("rb_off", "rb_on", "lp_off", "lp_on",
                     "offline_ratio", "online_ratio", "sell_all_reward",
                     "sell_all_offline_ratio", "sell_all_online_ratio"):
            v = getattr(self, name)
            lines.append(f"{name},{'' if v is None else format(v, '.17g')}")
        return "\n".join(lines) + "\n"


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else math.nan


def gap_report(inst: MarketInstance) -> GapReport:
    """Benchmark objectives side by side, plus the exact reward of the
    permit-everyone policy for single-good instances (evaluated at the
    instance's capacity)."""
    objs = {}
    for bench in Benchmark:
        sol = solve(inst, bench)
        if sol.status != STATUS_OPTIMAL:
            raise SimplexError(f"{bench.value}: {sol.diagnostics}")
        objs[bench] = sol.objective

    sell_all = None
    if inst.n_goods == 1:
        g = inst.goods[0]
        gamma = inst.arrival_rates()
        avail = availability_probability(g.supply_rate, g.perish_rate,
                                         float(gamma.sum()), inst.capacity)
        sell_all = float(avail * (gamma * inst.value_matrix()[0]).sum())

    return GapReport(
        rb_off=objs[Benchmark.RB_OFF],
        rb_on=objs[Benchmark.RB_ON],
        lp_off=objs[Benchmark.LP_OFF],
        lp_on=objs[Benchmark.LP_ON],
        offline_ratio=_ratio(objs[Benchmark.LP_OFF], objs[Benchmark.RB_OFF]),
        online_ratio=_ratio(objs[Benchmark.LP_ON], objs[Benchmark.RB_ON]),
        sell_all_reward=sell_all,
        sell_all_offline_ratio=None if sell_all is None else _ratio(sell_all, objs[Benchmark.RB_OFF]),
        sell_all_online_ratio=None if sell_all is None else _ratio(sell_all, objs[Benchmark.RB_ON]),
    )
