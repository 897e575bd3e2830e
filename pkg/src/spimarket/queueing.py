"""Birth-death analysis of per-good inventory.

Under a memoryless selling policy the number of available items of a good is
a birth-death chain: up-rate lambda (item arrivals), down-rate q*mu + gs in
state q (per-item perishing plus sales at the policy's permitted buying rate
gs).  Everything downstream needs the stationary probability that at least
one item is available, plus a few closed-form bounds on ratios of such
probabilities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Truncation for unbounded chains: stop once the next stationary weight drops
# below 1e-15 of the running total, with a hard cap on the state count.
SERIES_EPS = 1e-15
SERIES_CAP = 10_000

# Once the normalizing sum exceeds this, the empty-state probability is below
# double precision resolution and availability is exactly 1.0 in float64.
_SUM_HUGE = 1e250

# Regime split for the two ratio bounds: 1 - e^{-12/5}.
W_REGIME_SPLIT = -math.expm1(-12.0 / 5.0)


class ChainError(ValueError):
    """Birth-death chain is malformed or not positive recurrent."""


@dataclass(frozen=True)
class BirthDeathSpec:
    """A finite birth-death chain on states 0..K, or the unbounded
    availability chain given by a rate rule.

    Finite: up_rates[q] is the rate q -> q+1 for q = 0..K-1 and
    down_rates[q] is the rate q+1 -> q.  Unbounded: rule = (lam, mu, gs)
    meaning up-rate lam everywhere and down-rate q*mu + gs out of state q.
    """
    up_rates: tuple[float, ...] = ()
    down_rates: tuple[float, ...] = ()
    rule: tuple[float, float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "up_rates", tuple(float(r) for r in self.up_rates))
        object.__setattr__(self, "down_rates", tuple(float(r) for r in self.down_rates))
        if self.rule is not None:
            if self.up_rates or self.down_rates:
                raise ChainError("give explicit rates or a rule, not both")
            lam, mu, gs = self.rule
            _check_rates(lam, mu, gs)
            object.__setattr__(self, "rule", (float(lam), float(mu), float(gs)))
            return
        if len(self.up_rates) != len(self.down_rates):
            raise ChainError("up_rates and down_rates must have equal length")
        if not self.up_rates:
            raise ChainError("empty chain")
        for r in self.up_rates + self.down_rates:
            if not np.isfinite(r) or r < 0:
                raise ChainError(f"rates must be finite and nonnegative, got {r}")

    @classmethod
    def availability_chain(cls, lam: float, mu: float, gs: float,
                           capacity: int | None) -> "BirthDeathSpec":
        if capacity is None:
            return cls(rule=(lam, mu, gs))
        _check_rates(lam, mu, gs)
        _check_capacity(capacity)
        up = tuple(lam for _ in range(capacity))
        down = tuple((q + 1) * mu + gs for q in range(capacity))
        return cls(up_rates=up, down_rates=down)


@dataclass(frozen=True)
class StationaryDistribution:
    probabilities: np.ndarray
    truncated: bool = False  # True when an unbounded chain was cut off

    def __post_init__(self):
        arr = np.asarray(self.probabilities, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "probabilities", arr)

    def availability(self) -> float:
        return float(1.0 - self.probabilities[0])


def _check_rates(lam: float, mu: float, gs: float) -> None:
    if not (np.isfinite(lam) and lam > 0):
        raise ChainError(f"supply rate must be positive, got {lam}")
    if not (np.isfinite(mu) and mu > 0):
        raise ChainError(f"perish rate must be positive, got {mu}")
    if not (np.isfinite(gs) and gs >= 0):
        raise ChainError(f"permitted rate must be nonnegative, got {gs}")


def _check_capacity(capacity: int | None) -> None:
    if capacity is None:
        return
    if isinstance(capacity, bool) or not isinstance(capacity, (int, np.integer)):
        raise ChainError(f"capacity must be a positive int or None, got {capacity!r}")
    if capacity < 1:
        raise ChainError(f"capacity must be >= 1, got {capacity}")


def stationary_distribution(spec: BirthDeathSpec) -> StationaryDistribution:
    """Stationary law by detailed balance: pi_q proportional to the product
    of up/down rate ratios along 0 -> q."""
    if spec.rule is not None:
        lam, mu, gs = spec.rule
        weights = [1.0]
        term = 1.0
        total = 1.0
        q = 0
        truncated = False
        while True:
            q += 1
            term *= lam / (q * mu + gs)
            if term < SERIES_EPS * total or q > SERIES_CAP:
                truncated = True
                break
            weights.append(term)
            total += term
            if total > _SUM_HUGE:
                # keep weights finite; proportionality is all that matters
                weights = [w / total for w in weights]
                term /= total
                total = 1.0
        arr = np.array(weights)
        return StationaryDistribution(arr / arr.sum(), truncated=truncated)

    ups, downs = spec.up_rates, spec.down_rates
    weights = [1.0]
    term = 1.0
    for q in range(len(ups)):
        if downs[q] <= 0.0:
            if ups[q] > 0.0:
                raise ChainError(
                    f"down rate out of state {q + 1} is zero but state is reachable")
            # states above q carry no mass
            weights.extend(0.0 for _ in range(len(ups) - q))
            break
        term *= ups[q] / downs[q]
        weights.append(term)
    arr = np.array(weights)
    return StationaryDistribution(arr / arr.sum())


def _weight_sum(lam: float, mu: float, gs: float, capacity: int | None) -> float:
    """Sum over q >= 1 of prod_{r=1}^{q} lam / (r*mu + gs), truncated per the
    module rule for unbounded chains.  Returns inf once past _SUM_HUGE."""
    term = 1.0
    total = 0.0
    q = 0
    while True:
        q += 1
        if capacity is not None and q > capacity:
            break
        term *= lam / (q * mu + gs)
        total += term
        if capacity is None and (term < SERIES_EPS * (1.0 + total) or q >= SERIES_CAP):
            break
        if total > _SUM_HUGE:
            return math.inf
    return total


def availability_probability(lam: float, mu: float, gs: float,
                             capacity: int | None = None) -> float:
    """Stationary probability that at least one item is available when items
    arrive at rate lam, perish at rate mu, and sales drain at rate gs.

    Computed as S / (1 + S) with S the sum of stationary weights of the
    nonempty states, so small probabilities keep full relative precision.
    """
    _check_rates(lam, mu, gs)
    _check_capacity(capacity)
    s = _weight_sum(lam, mu, gs, capacity)
    if math.isinf(s):
        return 1.0
    return s / (1.0 + s)


def _poisson_availability(z: float, capacity: int | None) -> float:
    """1 - 1/sum_{q=0}^{C} z^q/q!, i.e. availability of the chain whose
    down rate is q*mu' with z = lam/mu'."""
    if capacity is None:
        return -math.expm1(-z)
    term = 1.0
    s = 0.0
    for q in range(1, capacity + 1):
        term *= z / q
        s += term
        if s > _SUM_HUGE:
            return 1.0
    return s / (1.0 + s)


def availability_bounds(lam: float, mu: float, gs: float,
                        capacity: int | None = None) -> tuple[float, float]:
    """Sandwich on availability_probability obtained by moving the sale
    drain: charging gs per item from below (down rate q*(mu+gs)) and
    dropping it from above (down rate q*mu)."""
    _check_rates(lam, mu, gs)
    _check_capacity(capacity)
    lower = _poisson_availability(lam / (mu + gs), capacity)
    upper = _poisson_availability(lam / mu, capacity)
    return lower, upper


def ratio_floor_small_w(capacity: int | None, x: float) -> float:
    """Floor on availability/x for per-buyer cap w <= x, valid in the small-w
    regime: (1 - 1/sum_{q=0}^{C} x^q/q!) / x."""
    if x <= 0:
        raise ChainError(f"x must be positive, got {x}")
    _check_capacity(capacity)
    return _poisson_availability(x, capacity) / x


def ratio_floor_large_w(capacity: int | None, x: float) -> float:
    """Floor on availability/x valid in the large-w regime:
    (1 - 1/(1/6 + (5/6) sum_{q=0}^{C} (6x/5)^q/q!)) / x."""
    if x <= 0:
        raise ChainError(f"x must be positive, got {x}")
    _check_capacity(capacity)
    z = 1.2 * x
    if capacity is None:
        s = math.expm1(z)  # sum minus the q=0 term
    else:
        term = 1.0
        s = 0.0
        for q in range(1, capacity + 1):
            term *= z / q
            s += term
            if s > _SUM_HUGE:
                return 1.0 / x if x >= 1.0 else 1.0
    # 1 - 1/(1/6 + 5/6 (1+s)) = (5/6) s / (1 + (5/6) s)
    t = s * 5.0 / 6.0
    return t / (1.0 + t) / x


def availability_to_w_floor(z: float, alpha: float, capacity: int | None) -> float:
    """Availability-to-w ratio of the capacity-C chain at supply z, unit
    perish rate, and the extremal permitted rate alpha*z/(1-e^{-z}),
    divided by w = 1-e^{-z}.

    This is the worst-case ratio of realized to planned sale rate for a
    scaled-LP policy run at capacity C; it decreases when alpha grows.
    """
    if z <= 0:
        raise ChainError(f"z must be positive, got {z}")
    if alpha < 0:
        raise ChainError(f"alpha must be nonnegative, got {alpha}")
    _check_capacity(capacity)
    w = -math.expm1(-z)
    gs = alpha * z / w
    s = _weight_sum(z, 1.0, gs, capacity)
    if math.isinf(s):
        return 1.0 / w
    return s / (1.0 + s) / w


def half_competitive_floor(z: float) -> float:
    """The capacity-2, alpha=1 availability-to-w ratio; stays >= 1/2 for all
    z > 0, approaching 1/2 as z -> 0 and 2/3 as z -> infinity."""
    return availability_to_w_floor(z, 1.0, 2)


def bounded_capacity_ratio(capacity: int, lam: float) -> float:
    """Availability at capacity C over availability unbounded, for the
    self-saturated chain gs = lam, mu = 1.  Tends to C/(C+1) as lam grows."""
    _check_capacity(capacity)
    if capacity is None:
        raise ChainError("capacity must be finite here")
    num = availability_probability(lam, 1.0, lam, capacity)
    den = availability_probability(lam, 1.0, lam, None)
    return num / den
