"""Market instance data model.

A market has n goods and m buyer types.  Items of good i arrive at Poisson
rate lambda_i and perish at exponential rate mu_i; buyers of type j arrive at
Poisson rate gamma_j and bid values[j][i] for one item of good i.  The seller
holds at most `capacity` available items per good (None = unbounded) and
discards arriving items beyond that.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class InstanceError(ValueError):
    """Instance file failed to parse or validate."""


def _require_number(x, label: str, minimum: float | None = None, strict: bool = False) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InstanceError(f"{label} must be a number, got {x!r}")
    v = float(x)
    if not np.isfinite(v):
        raise InstanceError(f"{label} must be finite, got {v!r}")
    if minimum is not None:
        if strict and v <= minimum:
            raise InstanceError(f"{label} must be > {minimum}, got {v}")
        if not strict and v < minimum:
            raise InstanceError(f"{label} must be >= {minimum}, got {v}")
    return v


@dataclass(frozen=True)
class GoodSpec:
    supply_rate: float   # lambda > 0
    perish_rate: float   # mu > 0

    def __post_init__(self):
        _require_number(self.supply_rate, "supply_rate", 0.0, strict=True)
        _require_number(self.perish_rate, "perish_rate", 0.0, strict=True)


@dataclass(frozen=True)
class BuyerTypeSpec:
    arrival_rate: float          # gamma >= 0
    values: tuple[float, ...]    # one bid per good

    def __post_init__(self):
        _require_number(self.arrival_rate, "arrival_rate", 0.0)
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        for v in self.values:
            _require_number(v, "value", 0.0)


@dataclass(frozen=True)
class MarketInstance:
    goods: tuple[GoodSpec, ...]
    buyers: tuple[BuyerTypeSpec, ...]
    capacity: int | None = None  # None means unbounded inventory

    def __post_init__(self):
        object.__setattr__(self, "goods", tuple(self.goods))
        object.__setattr__(self, "buyers", tuple(self.buyers))
        if not self.goods:
            raise InstanceError("need at least one good")
        if not self.buyers:
            raise InstanceError("need at least one buyer type")
        n = len(self.goods)
        for b in self.buyers:
            if len(b.values) != n:
                raise InstanceError(
                    f"buyer value vector has length {len(b.values)}, expected {n}")
        if self.capacity is not None:
            if isinstance(self.capacity, bool) or not isinstance(self.capacity, int):
                raise InstanceError(f"capacity must be a positive int or None, got {self.capacity!r}")
            if self.capacity < 1:
                raise InstanceError(f"capacity must be >= 1, got {self.capacity}")

    @property
    def n_goods(self) -> int:
        return len(self.goods)

    @property
    def n_buyers(self) -> int:
        return len(self.buyers)

    def supply_rates(self) -> np.ndarray:
        return np.array([g.supply_rate for g in self.goods])

    def perish_rates(self) -> np.ndarray:
        return np.array([g.perish_rate for g in self.goods])

    def arrival_rates(self) -> np.ndarray:
        return np.array([b.arrival_rate for b in self.buyers])

    def value_matrix(self) -> np.ndarray:
        """Bid values, shape (n_goods, n_buyers)."""
        return np.array([[b.values[i] for b in self.buyers] for i in range(self.n_goods)])

    def with_capacity(self, capacity: int | None) -> "MarketInstance":
        return MarketInstance(self.goods, self.buyers, capacity)


@dataclass(frozen=True)
class SaleRateMatrix:
    """Nonnegative sale rates x[i, j], shape (n_goods, n_buyers)."""
    rates: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.rates, dtype=float)
        if arr.ndim != 2:
            raise InstanceError(f"sale rate matrix must be 2-d, got shape {arr.shape}")
        if np.any(arr < -1e-9) or not np.all(np.isfinite(arr)):
            raise InstanceError("sale rates must be finite and nonnegative")
        arr = np.maximum(arr, 0.0)  # clear solver epsilon noise
        arr.setflags(write=False)
        object.__setattr__(self, "rates", arr)

    def by_good(self) -> np.ndarray:
        return self.rates.sum(axis=1)

    def by_buyer(self) -> np.ndarray:
        return self.rates.sum(axis=0)

    def total(self) -> float:
        return float(self.rates.sum())


# ---------------------------------------------------------------------------
# JSON format:
#   {"goods": [{"lambda": ..., "mu": ...}, ...],
#    "buyers": [{"gamma": ..., "values": [...]}, ...],
#    "capacity": positive int or null}
# Unknown keys are rejected so typos do not pass silently.

def instance_from_dict(data: dict) -> MarketInstance:
    if not isinstance(data, dict):
        raise InstanceError(f"instance must be a JSON object, got {type(data).__name__}")
    unknown = set(data) - {"goods", "buyers", "capacity"}
    if unknown:
        raise InstanceError(f"unknown instance keys: {sorted(unknown)}")
    for key in ("goods", "buyers"):
        if key not in data or not isinstance(data[key], list):
            raise InstanceError(f"instance needs a '{key}' array")
    goods = []
    for k, g in enumerate(data["goods"]):
        if not isinstance(g, dict):
            raise InstanceError(f"goods[{k}] must be an object")
        extra = set(g) - {"lambda", "mu"}
        if extra:
            raise InstanceError(f"goods[{k}] has unknown keys: {sorted(extra)}")
        if "lambda" not in g or "mu" not in g:
            raise InstanceError(f"goods[{k}] needs 'lambda' and 'mu'")
        goods.append(GoodSpec(_require_number(g["lambda"], f"goods[{k}].lambda", 0.0, strict=True),
                              _require_number(g["mu"], f"goods[{k}].mu", 0.0, strict=True)))
    buyers = []
    for k, b in enumerate(data["buyers"]):
        if not isinstance(b, dict):
            raise InstanceError(f"buyers[{k}] must be an object")
        extra = set(b) - {"gamma", "values"}
        if extra:
            raise InstanceError(f"buyers[{k}] has unknown keys: {sorted(extra)}")
        if "gamma" not in b or "values" not in b or not isinstance(b["values"], list):
            raise InstanceError(f"buyers[{k}] needs 'gamma' and a 'values' array")
        vals = tuple(_require_number(v, f"buyers[{k}].values[{i}]", 0.0)
                     for i, v in enumerate(b["values"]))
        buyers.append(BuyerTypeSpec(_require_number(b["gamma"], f"buyers[{k}].gamma", 0.0), vals))
    capacity = data.get("capacity")
    if capacity is not None:
        if isinstance(capacity, bool) or not isinstance(capacity, int):
            raise InstanceError(f"capacity must be a positive int or null, got {capacity!r}")
    return MarketInstance(tuple(goods), tuple(buyers), capacity)


def instance_to_dict(inst: MarketInstance) -> dict:
    return {
        "goods": [{"lambda": g.supply_rate, "mu": g.perish_rate} for g in inst.goods],
        "buyers": [{"gamma": b.arrival_rate, "values": list(b.values)} for b in inst.buyers],
        "capacity": inst.capacity,
    }


def load_instance(path) -> MarketInstance:
    """Read a market instance from a UTF-8 JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: invalid JSON: {exc}") from exc
    return instance_from_dict(data)


def dump_instance(inst: MarketInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(inst), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Single-good helpers.

def _require_single_good(inst: MarketInstance, what: str) -> None:
    if inst.n_goods != 1:
        raise InstanceError(f"{what} requires a single-good instance, got {inst.n_goods} goods")


def canonicalize_buyers(inst: MarketInstance) -> MarketInstance:
    """Sort buyer types of a single-good instance by value descending,
    merging equal-value types by summing their arrival rates."""
    _require_single_good(inst, "canonicalize_buyers")
    merged: dict[float, float] = {}
    for b in inst.buyers:
        merged[b.values[0]] = merged.get(b.values[0], 0.0) + b.arrival_rate
    buyers = tuple(BuyerTypeSpec(rate, (value,))
                   for value, rate in sorted(merged.items(), reverse=True))
    return MarketInstance(inst.goods, buyers, inst.capacity)


def is_canonical(inst: MarketInstance) -> bool:
    vals = [b.values[0] for b in inst.buyers]
    return inst.n_goods == 1 and all(a > b for a, b in zip(vals, vals[1:]))


def normalize_single_good(inst: MarketInstance) -> tuple[MarketInstance, float]:
    """Rescale time so the good's perish rate is 1.

    Returns (normalized instance, time_scale).  Rates divide by mu; a reward
    rate computed on the normalized instance multiplies by time_scale to get
    back to original units.
    """
    _require_single_good(inst, "normalize_single_good")
    mu = inst.goods[0].perish_rate
    goods = (GoodSpec(inst.goods[0].supply_rate / mu, 1.0),)
    buyers = tuple(BuyerTypeSpec(b.arrival_rate / mu, b.values) for b in inst.buyers)
    return MarketInstance(goods, buyers, inst.capacity), mu


# ---------------------------------------------------------------------------
# Named instances used by the experiment commands and tests.

def unit_gap_instance(capacity: int | None = None) -> MarketInstance:
    """Single good, lambda = mu = 1, one unit-value buyer type with gamma = 1.
    Separates the offline benchmark from every online policy."""
    return MarketInstance((GoodSpec(1.0, 1.0),),
                          (BuyerTypeSpec(1.0, (1.0,)),), capacity)


def fast_perish_gap_instance(lam: float = 1000.0) -> MarketInstance:
    """Single good with mu = lambda - 1 and one slow unit-value buyer stream.
    Separates the online benchmark from every feasible policy."""
    if lam < 2:
        raise InstanceError("fast_perish_gap_instance needs lambda >= 2")
    return MarketInstance((GoodSpec(lam, lam - 1.0),),
                          (BuyerTypeSpec(1.0, (1.0,)),), None)


def scarce_supply_instance(eps: float, gamma_slow: float | None = None) -> MarketInstance:
    """Single good with scarce slow supply (lambda = eps, mu = 1), one rare
    high-value buyer type and one abundant unit-value type.

    The abundant type stands in for an unbounded arrival stream; by default
    its rate is 1e3 * max(1, 1/eps), which is already deep in the regime
    where the online benchmark stops improving.
    """
    if eps <= 0:
        raise InstanceError("eps must be positive")
    if gamma_slow is None:
        gamma_slow = 1e3 * max(1.0, 1.0 / eps)
    return MarketInstance((GoodSpec(eps, 1.0),),
                          (BuyerTypeSpec(eps, (1.0 + 1.0 / eps,)),
                           BuyerTypeSpec(gamma_slow, (1.0,))), None)


def three_good_demo_instance(capacity: int | None = 2) -> MarketInstance:
    """A small asymmetric 3-good, 3-type market used in the experiment suite."""
    goods = (GoodSpec(1.5, 1.0), GoodSpec(0.8, 0.5), GoodSpec(2.5, 2.0))
    buyers = (BuyerTypeSpec(1.2, (3.0, 1.0, 0.5)),
              BuyerTypeSpec(0.7, (2.0, 2.0, 1.0)),
              BuyerTypeSpec(2.0, (1.0, 0.3, 2.0)))
    return MarketInstance(goods, buyers, capacity)
