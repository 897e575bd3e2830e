import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spimarket.model import (
    BuyerTypeSpec,
    GoodSpec,
    InstanceError,
    MarketInstance,
    SaleRateMatrix,
    canonicalize_buyers,
    dump_instance,
    instance_from_dict,
    instance_to_dict,
    is_canonical,
    load_instance,
    normalize_single_good,
    unit_gap_instance,
)

rates = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False, allow_infinity=False)
values = st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False)


@st.composite
def instances(draw, max_goods=4, max_buyers=4):
    n = draw(st.integers(1, max_goods))
    m = draw(st.integers(1, max_buyers))
    goods = tuple(GoodSpec(draw(rates), draw(rates)) for _ in range(n))
    buyers = tuple(
        BuyerTypeSpec(draw(st.one_of(st.just(0.0), rates)),
                      tuple(draw(values) for _ in range(n)))
        for _ in range(m))
    capacity = draw(st.one_of(st.none(), st.integers(1, 10)))
    return MarketInstance(goods, buyers, capacity)


def test_basic_construction():
    inst = unit_gap_instance()
    assert inst.n_goods == 1 and inst.n_buyers == 1
    assert inst.capacity is None
    assert inst.value_matrix().shape == (1, 1)


def test_validation_rejects_bad_rates():
    with pytest.raises(InstanceError):
        GoodSpec(0.0, 1.0)
    with pytest.raises(InstanceError):
        GoodSpec(1.0, -1.0)
    with pytest.raises(InstanceError):
        BuyerTypeSpec(-0.1, (1.0,))
    with pytest.raises(InstanceError):
        BuyerTypeSpec(1.0, (-1.0,))
    with pytest.raises(InstanceError):
        MarketInstance((GoodSpec(1, 1),), (BuyerTypeSpec(1, (1.0, 2.0)),))
    with pytest.raises(InstanceError):
        MarketInstance((GoodSpec(1, 1),), (BuyerTypeSpec(1, (1.0,)),), 0)
    with pytest.raises(InstanceError):
        MarketInstance((), (BuyerTypeSpec(1, ()),))


def test_capacity_must_be_int_not_float():
    with pytest.raises(InstanceError):
        MarketInstance((GoodSpec(1, 1),), (BuyerTypeSpec(1, (1.0,)),), 2.0)
    with pytest.raises(InstanceError):
        MarketInstance((GoodSpec(1, 1),), (BuyerTypeSpec(1, (1.0,)),), True)


def test_load_rejects_unknown_keys(tmp_path):
    good = {"goods": [{"lambda": 1, "mu": 1}], "buyers": [{"gamma": 1, "values": [1]}],
            "capacity": None}
    p = tmp_path / "inst.json"
    p.write_text(json.dumps(good))
    load_instance(p)

    for corrupt in (
        {**good, "extra": 1},
        {**good, "goods": [{"lambda": 1, "mu": 1, "nu": 2}]},
        {**good, "buyers": [{"gamma": 1, "values": [1], "weights": [1]}]},
        {**good, "capacity": 2.5},
        {**good, "capacity": 0},
        {**good, "goods": []},
    ):
        p.write_text(json.dumps(corrupt))
        with pytest.raises(InstanceError):
            load_instance(p)

    p.write_text("{not json")
    with pytest.raises(InstanceError):
        load_instance(p)


@given(instances())
def test_serialize_round_trip(inst):
    again = instance_from_dict(json.loads(json.dumps(instance_to_dict(inst))))
    assert again == inst


def test_dump_and_load(tmp_path):
    inst = unit_gap_instance(capacity=3)
    p = tmp_path / "i.json"
    dump_instance(inst, p)
    assert load_instance(p) == inst


@given(instances(max_goods=1))
def test_canonicalize_preserves_total_rate_and_mass(inst):
    canon = canonicalize_buyers(inst)
    assert is_canonical(canon)
    assert math.isclose(sum(b.arrival_rate for b in canon.buyers),
                        sum(b.arrival_rate for b in inst.buyers),
                        rel_tol=0, abs_tol=1e-9 * (1 + sum(b.arrival_rate for b in inst.buyers)))
    # rate mass per distinct value is preserved exactly as a dict
    def mass(i):
        d = {}
        for b in i.buyers:
            d[b.values[0]] = d.get(b.values[0], 0.0) + b.arrival_rate
        return d
    a, b = mass(inst), mass(canon)
    assert set(a) == set(b)
    assert all(math.isclose(a[k], b[k], rel_tol=1e-12, abs_tol=1e-12) for k in a)


def test_canonicalize_merges_and_sorts():
    inst = MarketInstance((GoodSpec(1, 1),),
                          (BuyerTypeSpec(0.5, (1.0,)),
                           BuyerTypeSpec(2.0, (3.0,)),
                           BuyerTypeSpec(0.25, (1.0,))))
    canon = canonicalize_buyers(inst)
    assert [b.values[0] for b in canon.buyers] == [3.0, 1.0]
    assert [b.arrival_rate for b in canon.buyers] == [2.0, 0.75]


def test_canonicalize_requires_single_good():
    inst = MarketInstance((GoodSpec(1, 1), GoodSpec(1, 1)),
                          (BuyerTypeSpec(1, (1.0, 1.0)),))
    with pytest.raises(InstanceError):
        canonicalize_buyers(inst)


@given(instances(max_goods=1))
def test_normalize_single_good(inst):
    norm, scale = normalize_single_good(inst)
    assert scale == inst.goods[0].perish_rate
    assert norm.goods[0].perish_rate == 1.0
    assert math.isclose(norm.goods[0].supply_rate * scale, inst.goods[0].supply_rate,
                        rel_tol=1e-12)
    for nb, ob in zip(norm.buyers, inst.buyers):
        assert math.isclose(nb.arrival_rate * scale, ob.arrival_rate,
                            rel_tol=1e-12, abs_tol=1e-300)
        assert nb.values == ob.values
    assert norm.capacity == inst.capacity


def test_sale_rate_matrix_clamps_solver_noise():
    m = SaleRateMatrix(np.array([[1.0, -1e-12], [0.5, 0.0]]))
    assert m.rates[0, 1] == 0.0
    assert not m.rates.flags.writeable
    with pytest.raises(InstanceError):
        SaleRateMatrix(np.array([[-1.0]]))
    assert m.by_good().shape == (2,)
    assert m.by_buyer().shape == (2,)
    assert math.isclose(m.total(), 1.5)
