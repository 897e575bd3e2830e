"""Continuous-time simulation of permit policies and offline benchmarks.

simulate_policy runs the jitted event loop and reduces its per-batch
counters to rates with batch-means standard errors (20 batches by
default). Fractions conditioned on arrivals use ratio-of-sums point
estimates with per-batch fractions for the spread, skipping batches
with no arrivals.

simulate_offline_matching draws a full trajectory up front and prices
it with the hindsight max-weight matching; it is only defined for
unbounded capacity, where the benchmark does not depend on a discard
rule.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import market_kernel
from .matching import max_weight_offline_match
from .model import InstanceError, MarketInstance, SaleRateMatrix
from .policy import PolicySpec, PostedPrice
from .queueing import availability_probability

DEFAULT_BATCHES = 20


def _seed_to_uint64(seed):
    return np.random.SeedSequence(seed).generate_state(1, np.uint64)[0]


def default_burn_in(instance):
    """Window long enough for the slowest good to forget the empty start."""
    return 100.0 / min(g.perish_rate for g in instance.goods)


def _sale_probability_matrix(instance, policy):
    if isinstance(policy, PostedPrice):
        return policy.sale_probabilities(instance)
    if isinstance(policy, PolicySpec):
        if policy.n_goods != instance.n_goods:
            raise InstanceError("policy and instance disagree on the number of goods")
        if policy.sale_probabilities.shape[1] != instance.n_buyers:
            raise InstanceError("policy and instance disagree on the number of buyer types")
        return np.array(policy.sale_probabilities, dtype=float)
    raise InstanceError(f"cannot simulate policy of type {type(policy).__name__}")


def _ratio_with_stderr(num, den):
    """Ratio of sums with a batch-means stderr; (nan, nan) if den sums to 0."""
    total_den = float(den.sum())
    if total_den <= 0:
        return math.nan, math.nan
    frac = float(num.sum()) / total_den
    valid = den > 0
    if int(valid.sum()) >= 2:
        per_batch = num[valid] / den[valid]
        stderr = float(per_batch.std(ddof=1)) / math.sqrt(int(valid.sum()))
    else:
        stderr = math.nan
    return frac, stderr


@dataclass(frozen=True)
class CheckRow:
    """One line of a statistical check; slack >= 0 means the check holds."""

    label: str
    observed: float
    reference: float
    slack: float
    tolerance: float
    status: str  # "pass" | "fail" | "not-applicable"


@dataclass(frozen=True)
class SimReport:
    horizon: float
    burn_in: float
    n_batches: int
    reward_rate: float
    reward_stderr: float
    sale_rates: SaleRateMatrix
    sale_stderr: np.ndarray
    availability_time_fraction: np.ndarray
    availability_stderr: np.ndarray
    arrival_seen_fraction: np.ndarray
    arrival_seen_stderr: np.ndarray
    reach_and_available_fraction: np.ndarray
    reach_and_available_stderr: np.ndarray
    tilde_reach_fraction: np.ndarray
    tilde_reach_stderr: np.ndarray
    discard_rate: np.ndarray
    perish_unsold_rate: np.ndarray
    flow_rate_stderr: np.ndarray
    type_arrival_counts: np.ndarray

    def to_csv(self):
        lines = ["good,buyer,s_hat,stderr"]
        n, m = self.sale_rates.rates.shape
        for i in range(n):
            for j in range(m):
                lines.append("%d,%d,%.17g,%.17g"
                             % (i, j, self.sale_rates.rates[i, j], self.sale_stderr[i, j]))
        lines.append("reward_rate,%.17g,%.17g" % (self.reward_rate, self.reward_stderr))
        for i in range(n):
            lines.append("availability_%d,%.17g,%.17g"
                         % (i, self.availability_time_fraction[i], self.availability_stderr[i]))
        for i in range(n):
            lines.append("seen_%d,%.17g,%.17g"
                         % (i, self.arrival_seen_fraction[i], self.arrival_seen_stderr[i]))
        for i in range(n):
            lines.append("discard_rate_%d,%.17g" % (i, self.discard_rate[i]))
        for i in range(n):
            lines.append("perish_unsold_rate_%d,%.17g" % (i, self.perish_unsold_rate[i]))
        return "\n".join(lines) + "\n"


def simulate_policy(instance, policy, horizon, burn_in=None, seed=0,
                    n_batches=DEFAULT_BATCHES):
    """Estimate stationary rates for a permit policy on one trajectory."""
    if horizon <= 0:
        raise InstanceError("horizon must be positive")
    if n_batches < 2:
        raise InstanceError("need at least two batches for a stderr")
    if burn_in is None:
        burn_in = default_burn_in(instance)
    if burn_in < 0:
        raise InstanceError("burn_in must be nonnegative")
    p = np.ascontiguousarray(_sale_probability_matrix(instance, policy))
    n = instance.n_goods
    m = instance.n_buyers
    nb = int(n_batches)
    lam = instance.supply_rates()
    mu = instance.perish_rates()
    gamma = instance.arrival_rates()
    cap = np.int64(-1 if instance.capacity is None else instance.capacity)

    time_avail = np.zeros((nb, n))
    seen = np.zeros((nb, n))
    arrivals = np.zeros(nb)
    type_arrivals = np.zeros((nb, m))
    sales = np.zeros((nb, n, m))
    reach_avail = np.zeros((nb, n, m))
    tilde_reach = np.zeros((nb, n, m))
    discards = np.zeros((nb, n))
    perish_unsold = np.zeros((nb, n))
    market_kernel(_seed_to_uint64(seed), lam, mu, gamma, p, cap,
                  float(horizon), float(burn_in), nb,
                  time_avail, seen, arrivals, type_arrivals, sales,
                  reach_avail, tilde_reach, discards, perish_unsold)

    batch_len = horizon / nb
    values = instance.value_matrix()
    reward_batches = (sales * values[None, :, :]).sum(axis=(1, 2)) / batch_len
    reward_rate = float(reward_batches.mean())
    reward_stderr = float(reward_batches.std(ddof=1)) / math.sqrt(nb)

    sale_rate = sales.sum(axis=0) / horizon
    sale_stderr = (sales / batch_len).std(axis=0, ddof=1) / math.sqrt(nb)

    avail_frac = time_avail.sum(axis=0) / horizon
    avail_stderr = (time_avail / batch_len).std(axis=0, ddof=1) / math.sqrt(nb)

    seen_frac = np.empty(n)
    seen_stderr = np.empty(n)
    for i in range(n):
        seen_frac[i], seen_stderr[i] = _ratio_with_stderr(seen[:, i], arrivals)

    reach_frac = np.empty((n, m))
    reach_stderr = np.empty((n, m))
    tilde_frac = np.empty((n, m))
    tilde_stderr = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            reach_frac[i, j], reach_stderr[i, j] = _ratio_with_stderr(
                reach_avail[:, i, j], type_arrivals[:, j])
            tilde_frac[i, j], tilde_stderr[i, j] = _ratio_with_stderr(
                tilde_reach[:, i, j], type_arrivals[:, j])

    flow = (sales.sum(axis=2) + perish_unsold + discards) / batch_len
    flow_stderr = flow.std(axis=0, ddof=1) / math.sqrt(nb)

    return SimReport(
        horizon=float(horizon),
        burn_in=float(burn_in),
        n_batches=nb,
        reward_rate=reward_rate,
        reward_stderr=reward_stderr,
        sale_rates=SaleRateMatrix(sale_rate),
        sale_stderr=sale_stderr,
        availability_time_fraction=avail_frac,
        availability_stderr=avail_stderr,
        arrival_seen_fraction=seen_frac,
        arrival_seen_stderr=seen_stderr,
        reach_and_available_fraction=reach_frac,
        reach_and_available_stderr=reach_stderr,
        tilde_reach_fraction=tilde_frac,
        tilde_reach_stderr=tilde_stderr,
        discard_rate=discards.sum(axis=0) / horizon,
        perish_unsold_rate=perish_unsold.sum(axis=0) / horizon,
        flow_rate_stderr=flow_stderr,
        type_arrival_counts=type_arrivals.sum(axis=0),
    )


def pasta_check(report, n_sigma=4.0):
    """Arrival-seen availability must match time-average availability.

    Both estimators target P[good available]; a gap beyond n_sigma
    combined stderrs flags a simulator bug. Goods are skipped (status
    not-applicable) when no arrivals were observed.
    """
    rows = []
    n = report.availability_time_fraction.shape[0]
    for i in range(n):
        seen = report.arrival_seen_fraction[i]
        tavg = report.availability_time_fraction[i]
        if math.isnan(seen):
            rows.append(CheckRow(f"good {i}", seen, tavg, math.nan, math.nan,
                                 "not-applicable"))
            continue
        tol = n_sigma * math.hypot(report.arrival_seen_stderr[i],
                                   report.availability_stderr[i])
        slack = tol - abs(seen - tavg)
        rows.append(CheckRow(f"good {i}", seen, tavg, slack, tol,
                             "pass" if slack >= 0 else "fail"))
    return rows


def conservation_check(instance, report, n_sigma=3.0):
    """Sales + unsold perishes + discards must balance the supply rate."""
    rows = []
    lam = instance.supply_rates()
    flow = (report.sale_rates.by_good() + report.perish_unsold_rate
            + report.discard_rate)
    for i in range(instance.n_goods):
        tol = n_sigma * report.flow_rate_stderr[i]
        slack = tol - abs(flow[i] - lam[i])
        rows.append(CheckRow(f"good {i}", float(flow[i]), float(lam[i]),
                             slack, tol, "pass" if slack >= 0 else "fail"))
    return rows


def dominance_check(instance, policy, horizon=None, burn_in=None, seed=0,
                    n_batches=DEFAULT_BATCHES, report=None, n_sigma=3.0):
    """Reaching-while-available must dominate its decoupled lower bound.

    For each pair the simulated joint frequency of {buyer reaches good
    unmatched} and {good available} is compared against the product of
    the simulated unblocked-reach frequency and the analytic stationary
    availability at the policy's permitted rate. Pairs with no arrivals
    are reported not-applicable.
    """
    if instance.n_goods < 2:
        raise InstanceError("the dominance bound is about competition between goods; "
                            "use at least two goods")
    if not isinstance(policy, PolicySpec):
        raise InstanceError("dominance_check needs a permit policy")
    if report is None:
        if horizon is None:
            raise InstanceError("pass either a horizon or a precomputed report")
        report = simulate_policy(instance, policy, horizon, burn_in=burn_in,
                                 seed=seed, n_batches=n_batches)
    lam = instance.supply_rates()
    mu = instance.perish_rates()
    rows = []
    for i in range(instance.n_goods):
        avail = availability_probability(lam[i], mu[i],
                                         float(policy.permitted_rates[i]),
                                         instance.capacity)
        for j in range(instance.n_buyers):
            joint = report.reach_and_available_fraction[i, j]
            tilde = report.tilde_reach_fraction[i, j]
            label = f"good {i}, buyer {j}"
            if math.isnan(joint) or math.isnan(tilde):
                rows.append(CheckRow(label, joint, tilde, math.nan, math.nan,
                                     "not-applicable"))
                continue
            bound = tilde * avail
            se = math.hypot(report.reach_and_available_stderr[i, j],
                            avail * report.tilde_reach_stderr[i, j])
            slack = joint - bound
            tol = n_sigma * se
            rows.append(CheckRow(label, joint, bound, slack, tol,
                                 "pass" if slack >= -tol else "fail"))
    return rows


# --- offline benchmark ------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    item_good: np.ndarray
    item_start: np.ndarray
    item_end: np.ndarray
    buyer_type: np.ndarray
    buyer_time: np.ndarray


def generate_trajectory(instance, horizon, seed=0):
    """Sample arrivals and lifetimes for an empty-start window [0, horizon)."""
    if horizon <= 0:
        raise InstanceError("horizon must be positive")
    rng = np.random.default_rng(seed)
    goods = []
    starts = []
    ends = []
    for i, g in enumerate(instance.goods):
        k = rng.poisson(g.supply_rate * horizon)
        t = np.sort(rng.uniform(0.0, horizon, size=k))
        life = rng.exponential(1.0 / g.perish_rate, size=k)
        goods.append(np.full(k, i, dtype=np.int64))
        starts.append(t)
        ends.append(t + life)
    btypes = []
    btimes = []
    for j, b in enumerate(instance.buyers):
        k = rng.poisson(b.arrival_rate * horizon)
        btypes.append(np.full(k, j, dtype=np.int64))
        btimes.append(rng.uniform(0.0, horizon, size=k))
    item_good = np.concatenate(goods) if goods else np.empty(0, np.int64)
    item_start = np.concatenate(starts) if starts else np.empty(0)
    item_end = np.concatenate(ends) if ends else np.empty(0)
    buyer_type = np.concatenate(btypes) if btypes else np.empty(0, np.int64)
    buyer_time = np.concatenate(btimes) if btimes else np.empty(0)
    order = np.argsort(buyer_time, kind="stable")
    return Trajectory(item_good, item_start, item_end,
                      buyer_type[order], buyer_time[order])


@dataclass(frozen=True)
class OfflineReport:
    horizon: float
    n_batches: int
    value_rate: float
    value_stderr: float
    matched_rate: float
    n_components: int

    def to_csv(self):
        return ("quantity,value\n"
                "value_rate,%.17g\n"
                "value_stderr,%.17g\n"
                "matched_rate,%.17g\n"
                "n_components,%d\n"
                % (self.value_rate, self.value_stderr, self.matched_rate,
                   self.n_components))


def simulate_offline_matching(instance, horizon, seed=0,
                              n_batches=DEFAULT_BATCHES):
    """Hindsight-optimal value rate on one sampled trajectory."""
    if instance.capacity is not None:
        raise InstanceError("the hindsight benchmark is defined for unbounded "
                            "capacity; drop the capacity cap first")
    if n_batches < 2:
        raise InstanceError("need at least two batches for a stderr")
    traj = generate_trajectory(instance, horizon, seed)
    result = max_weight_offline_match(traj.item_good, traj.item_start,
                                      traj.item_end, traj.buyer_type,
                                      traj.buyer_time, instance.value_matrix())
    nb = int(n_batches)
    batch_len = horizon / nb
    batch_value = np.zeros(nb)
    if result.buyer_indices.size:
        b = np.minimum((traj.buyer_time[result.buyer_indices] / batch_len)
                       .astype(np.int64), nb - 1)
        np.add.at(batch_value, b, result.pair_values)
    rates = batch_value / batch_len
    stderr = float(rates.std(ddof=1)) / math.sqrt(nb)
    return OfflineReport(
        horizon=float(horizon),
        n_batches=nb,
        value_rate=result.total_value / horizon,
        value_stderr=stderr,
        matched_rate=result.item_indices.size / horizon,
        n_components=result.n_components,
    )
