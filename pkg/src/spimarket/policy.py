"""Scaled-LP selling policies.

A policy is built from benchmark sale rates x*: when a type-j buyer arrives
and good i is available, the seller offers it with probability
p_ij = alpha * x*_ij / (gamma_j * w_i).  The scale w_i is chosen so p stays
a probability; the permitted buying rate each good then faces is
gamma*_i = sum_j gamma_j p_ij, which drives the availability chain.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .lp import LpSolution
from .model import InstanceError, MarketInstance, SaleRateMatrix, is_canonical
from .queueing import availability_probability

P_CLAMP_TOL = 1e-12
SHAPE_TOL = 1e-9


class IncompatiblePairingError(ValueError):
    """The planned sale rates cannot be realized as probabilities."""


class NotPostedPriceError(ValueError):
    """Sale probabilities do not have the threshold shape."""


class WRule(enum.Enum):
    PASTA = "pasta"          # w_i = 1 - e^{-lambda_i/mu_i}
    COLLINA_MIN = "collina"  # w_i = min(1, lambda_i/mu_i)
    ONLINE = "online"        # single good: w = min(1-e^{-lam/mu}, (lam - sum_j x_j)/mu)


@dataclass(frozen=True)
class PolicySpec:
    alpha: float
    w: np.ndarray                   # (n,)
    sale_probabilities: np.ndarray  # (n, m)
    permitted_rates: np.ndarray     # (n,)

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise IncompatiblePairingError(f"alpha must be in (0, 1], got {self.alpha}")
        w = np.asarray(self.w, dtype=float)
        p = np.asarray(self.sale_probabilities, dtype=float)
        gs = np.asarray(self.permitted_rates, dtype=float)
        if p.ndim != 2 or w.shape != (p.shape[0],) or gs.shape != (p.shape[0],):
            raise IncompatiblePairingError("inconsistent policy shapes")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise IncompatiblePairingError("w must be positive and finite")
        if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
            raise IncompatiblePairingError("sale probabilities must lie in [0, 1]")
        for arr in (w, p, gs):
            arr.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "sale_probabilities", p)
        object.__setattr__(self, "permitted_rates", gs)

    @property
    def n_goods(self) -> int:
        return self.sale_probabilities.shape[0]

    def to_json_dict(self) -> dict:
        return {"alpha": self.alpha,
                "w": [float(v) for v in self.w],
                "p": [[float(v) for v in row] for row in self.sale_probabilities]}


def policy_from_json_dict(data: dict, inst: MarketInstance) -> PolicySpec:
    unknown = set(data) - {"alpha", "w", "p"}
    if unknown:
        raise IncompatiblePairingError(f"unknown policy keys: {sorted(unknown)}")
    p = np.asarray(data["p"], dtype=float)
    if p.shape != (inst.n_goods, inst.n_buyers):
        raise IncompatiblePairingError(
            f"policy p has shape {p.shape}, instance needs {(inst.n_goods, inst.n_buyers)}")
    gs = p @ inst.arrival_rates()
    return PolicySpec(float(data["alpha"]), np.asarray(data["w"], dtype=float), p, gs)


@dataclass(frozen=True)
class PostedPrice:
    """Accept any bid above the threshold; accept a bid exactly at the
    threshold with the boundary probability."""
    threshold_value: float
    boundary_probability: float

    def __post_init__(self):
        if not (0.0 <= self.boundary_probability <= 1.0):
            raise NotPostedPriceError(
                f"boundary probability must be in [0, 1], got {self.boundary_probability}")
        if self.threshold_value < 0 or not math.isfinite(self.threshold_value):
            raise NotPostedPriceError(f"bad threshold {self.threshold_value}")

    def to_json_dict(self) -> dict:
        return {"threshold": self.threshold_value,
                "boundary_p": self.boundary_probability}

    def sale_probabilities(self, inst: MarketInstance) -> np.ndarray:
        values = inst.value_matrix()[0]
        p = np.where(values > self.threshold_value, 1.0,
                     np.where(values == self.threshold_value,
                              self.boundary_probability, 0.0))
        return p[None, :]


def compute_w(inst: MarketInstance, rule: WRule,
              rates: SaleRateMatrix | None = None) -> np.ndarray:
    lam = inst.supply_rates()
    mu = inst.perish_rates()
    if rule is WRule.PASTA:
        return -np.expm1(-lam / mu)
    if rule is WRule.COLLINA_MIN:
        return np.minimum(1.0, lam / mu)
    if rule is WRule.ONLINE:
        if inst.n_goods != 1:
            raise InstanceError("the online w rule is defined for single-good instances")
        if rates is None:
            raise InstanceError("the online w rule needs the benchmark sale rates")
        slack = (lam - rates.rates.sum(axis=1)) / mu
        return np.minimum(-np.expm1(-lam / mu), slack)
    raise InstanceError(f"unknown w rule {rule!r}")


def build(inst: MarketInstance, solution: LpSolution | SaleRateMatrix,
          alpha: float, w_rule: WRule | np.ndarray) -> PolicySpec:
    """Scale benchmark sale rates into per-pair sale probabilities.

    Raises IncompatiblePairingError, naming the offending pair, if some
    p_ij would exceed 1 (beyond clamping noise) or if a good with planned
    sales ends up with a nonpositive scale w_i.
    """
    rates = solution.rates if isinstance(solution, LpSolution) else solution
    x = rates.rates
    n, m = x.shape
    if (n, m) != (inst.n_goods, inst.n_buyers):
        raise IncompatiblePairingError(
            f"rates shape {(n, m)} does not match instance {(inst.n_goods, inst.n_buyers)}")
    if not (0.0 < alpha <= 1.0):
        raise IncompatiblePairingError(f"alpha must be in (0, 1], got {alpha}")
    if isinstance(w_rule, WRule):
        w = compute_w(inst, w_rule, rates)
    else:
        w = np.asarray(w_rule, dtype=float).copy()
        if w.shape != (n,):
            raise IncompatiblePairingError(f"w must have shape ({n},)")

    gamma = inst.arrival_rates()
    p = np.zeros((n, m))
    for i in range(n):
        if w[i] <= 0.0:
            if np.any(x[i] > 0.0):
                j = int(np.argmax(x[i]))
                raise IncompatiblePairingError(
                    f"pair (good {i}, buyer {j}): scale w[{i}] = {w[i]:.3g} "
                    f"cannot carry planned rate {x[i, j]:.3g}")
            w[i] = 1.0  # no planned sales; any positive scale works
            continue
        for j in range(m):
            if gamma[j] <= 0.0:
                if x[i, j] > 0.0:
                    raise IncompatiblePairingError(
                        f"pair (good {i}, buyer {j}): planned rate {x[i, j]:.3g} "
                        "for a buyer type that never arrives")
                continue
            pij = alpha * x[i, j] / (gamma[j] * w[i])
            if pij > 1.0 + P_CLAMP_TOL:
                raise IncompatiblePairingError(
                    f"pair (good {i}, buyer {j}): sale probability {pij:.17g} exceeds 1")
            p[i, j] = min(pij, 1.0)
    permitted = p @ gamma
    return PolicySpec(alpha, w, p, permitted)


def permit_all(inst: MarketInstance) -> PolicySpec:
    """The policy that offers any available item to every buyer."""
    n, m = inst.n_goods, inst.n_buyers
    gamma = inst.arrival_rates()
    return PolicySpec(1.0, np.ones(n), np.ones((n, m)),
                      np.full(n, float(gamma.sum())))


def to_posted_price(policy: PolicySpec, inst: MarketInstance) -> PostedPrice:
    """Read a single-good policy as a posted price.

    Needs a canonicalized instance and the threshold shape: sale probability
    1 on a prefix of the (descending) values, one free boundary entry, then
    zeros.  Types that never arrive carry no mass and are skipped.
    """
    if inst.n_goods != 1 or not is_canonical(inst):
        raise NotPostedPriceError("needs a canonicalized single-good instance")
    p = policy.sale_probabilities[0]
    gamma = inst.arrival_rates()
    values = inst.value_matrix()[0]

    state = "ones"
    threshold = None
    boundary = None
    for j in range(len(p)):
        if gamma[j] <= 0.0:
            continue
        if state == "ones":
            if p[j] >= 1.0 - SHAPE_TOL:
                continue
            threshold, boundary = values[j], p[j]
            state = "zeros"
        elif p[j] > SHAPE_TOL:
            raise NotPostedPriceError(
                f"sale probability rises again at buyer {j} (p = {p[j]:.6g})")
    if state == "ones":
        return PostedPrice(float(values[-1]), 1.0)
    return PostedPrice(float(threshold), float(boundary))


def analytic_sale_rates(inst: MarketInstance,
                        policy: PolicySpec | PostedPrice) -> tuple[SaleRateMatrix, float]:
    """Exact stationary sale rates of a single-good memoryless policy.

    The availability chain drains at the permitted rate gamma* = sum_j
    gamma_j p_j, every arriving permitted buyer who sees an available item
    buys, so s_j = gamma_j * p_j * P[available]."""
    if inst.n_goods != 1:
        raise InstanceError("closed-form evaluation covers single-good instances")
    if isinstance(policy, PostedPrice):
        p = policy.sale_probabilities(inst)
    else:
        p = policy.sale_probabilities
    gamma = inst.arrival_rates()
    good = inst.goods[0]
    gs = float(p[0] @ gamma)
    avail = availability_probability(good.supply_rate, good.perish_rate, gs,
                                     inst.capacity)
    s = SaleRateMatrix((gamma * p[0] * avail)[None, :])
    reward = float((inst.value_matrix() * s.rates).sum())
    return s, reward


def round_deterministic(posted: PostedPrice,
                        inst: MarketInstance) -> tuple[PostedPrice, SaleRateMatrix, float]:
    """Drop the boundary randomization: evaluate the strict variant (reject
    at the threshold) and the inclusive one (accept at the threshold), return
    whichever earns more.  The better one keeps at least half the randomized
    policy's reward."""
    strict = PostedPrice(posted.threshold_value, 0.0)
    inclusive = PostedPrice(posted.threshold_value, 1.0)
    s0, r0 = analytic_sale_rates(inst, strict)
    s1, r1 = analytic_sale_rates(inst, inclusive)
    if r0 >= r1:
        return strict, s0, r0
    return inclusive, s1, r1
