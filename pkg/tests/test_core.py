from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shallowsep.core import (
    BitString,
    BudgetError,
    ComplexDyadicSqrt2,
    Dyadic,
    ExactDist,
    ProductDist,
    empirical,
    kfold,
    marginal,
    mix,
    product,
    sample,
    sample_indices,
    tow,
    tv_distance,
    tv_event_characterization_check,
)

DHARD11 = ExactDist.from_pmf(2, {"00": "3/4", "10": "1/8", "11": "1/8"})


def test_tow_values():
    assert [tow(x) for x in range(5)] == [1, 2, 4, 16, 65536]
    with pytest.raises(ValueError):
        tow(-1)


def test_dyadic_canonical_form():
    assert (Dyadic(4, 3).num, Dyadic(4, 3).denom_exp) == (1, 1)
    assert (Dyadic(0, 9).num, Dyadic(0, 9).denom_exp) == (0, 0)
    assert str(Dyadic(0)) == "0/2^0"
    assert Dyadic.parse("3/2^2") == Fraction(3, 4)
    assert Dyadic.parse("1/8") == Dyadic(1, 3)
    with pytest.raises(ValueError):
        Dyadic.from_fraction(Fraction(1, 3))


dyadics = st.builds(Dyadic, st.integers(-(2**70), 2**70), st.integers(0, 80))


@given(dyadics, dyadics)
def test_dyadic_arithmetic_exact(a, b):
    assert (a + b) - b == a
    assert (a * b).to_fraction() == a.to_fraction() * b.to_fraction()
    assert (a < b) == (a.to_fraction() < b.to_fraction())
    assert (a * Dyadic(1, 5)) / Dyadic(1, 5) == a
    c = a + b
    assert c.num % 2 == 1 or (c.num == 0 and c.denom_exp == 0) or c.denom_exp == 0


def test_complex_amplitude():
    h = ComplexDyadicSqrt2(1, 0, 1)
    assert (h * h).modulus_squared() == Dyadic(1, 2)
    assert ComplexDyadicSqrt2.i_power(3) == ComplexDyadicSqrt2(0, -1)
    assert ComplexDyadicSqrt2(2, 2, 2) == ComplexDyadicSqrt2(1, 1, 0)


def test_bitstring_ops():
    b = BitString.from_str("101")
    assert str(b) == "101" and b.weight == 2 and b[0] == 1 and b[1] == 0
    assert str(b ^ BitString.from_str("110")) == "011"
    assert str(b.concat(BitString.from_str("0"))) == "1010"
    with pytest.raises(ValueError):
        b ^ BitString.from_str("1")


def test_tv_examples():
    assert tv_distance(DHARD11, DHARD11) == 0
    assert tv_distance(ExactDist.point("00"), ExactDist.point("11")) == 1
    u = ProductDist(["1/4", "1/2"])
    assert tv_distance(u, DHARD11) == Fraction(3, 8)
    assert tv_event_characterization_check(u, DHARD11)
    assert tv_event_characterization_check(ExactDist.point("0"), ExactDist.point("1"))
    with pytest.raises(ValueError):
        tv_distance(ExactDist.point("0"), ExactDist.point("00"))


def test_marginal_examples():
    assert marginal(DHARD11, [0, 1]) == DHARD11
    even = ExactDist.from_pmf(2, {"00": "1/2", "11": "1/2"})
    assert marginal(even, [1]) == ExactDist.uniform(1)
    assert marginal(DHARD11, [0]) == ProductDist(["1/4"]).to_exact()
    swapped = marginal(DHARD11, [1, 0])
    assert swapped.mass("01") == Fraction(1, 8) and swapped.mass("00") == Fraction(3, 4)
    with pytest.raises(ValueError):
        marginal(DHARD11, [])
    with pytest.raises(ValueError):
        marginal(DHARD11, [2])


def test_mix_product_kfold_examples():
    p0, p1 = ExactDist.point("0"), ExactDist.point("1")
    assert mix([1], [DHARD11]) == DHARD11
    assert mix(["1/2", "1/2"], [p0, p1]) == ExactDist.uniform(1)
    assert mix(["3/4", "1/4"], [p0, p1]) == ProductDist(["1/4"]).to_exact()
    with pytest.raises(ValueError):
        mix(["1/2", "1/4"], [p0, p1])
    assert kfold(ExactDist.uniform(1), 3) == ExactDist.uniform(3)
    assert product(p0, p1) == ExactDist.point("01")
    k2 = kfold(DHARD11, 2)
    assert k2.length == 4 and k2.mass("0000") == Fraction(9, 16)
    assert kfold(DHARD11, 1) == DHARD11


def test_budget_guard():
    with pytest.raises(BudgetError):
        kfold(DHARD11, 13)
    assert kfold(DHARD11, 3, budget=6).length == 6


def test_json_roundtrip():
    text = DHARD11.to_json()
    assert '"01"' not in text
    assert ExactDist.from_json(text) == DHARD11
    assert DHARD11.to_json_obj()["pmf"]["00"] == "3/2^2"


def test_sampling_contract():
    assert [str(b) for b in sample(ExactDist.point("101"), 7, 5)] == ["101"] * 5
    a = sample_indices(ExactDist.uniform(1), 11, 100)
    b = sample_indices(ExactDist.uniform(1), 11, 100)
    assert np.array_equal(a, b)
    freq = empirical(sample_indices(ProductDist(["1/4"]), 2024, 10**6), 1)[1]
    assert abs(freq - 0.25) <= 0.002
    freq = empirical(sample_indices(ProductDist(["1/4"]).to_exact(), 2025, 10**6), 1)[1]
    assert abs(freq - 0.25) <= 0.002


def test_large_exponent_dist():
    p = ProductDist([Dyadic(1, 40), Dyadic(3, 50)]).to_exact()
    assert p.exp == 90 and p.num.dtype == object
    assert tv_distance(p, p) == 0
    assert sum((p.mass(i) for i in range(4)), Dyadic(0)) == 1
    assert len(sample(p, 1, 3)) == 3


@st.composite
def dists(draw, length):
    exp = draw(st.integers(0, 6))
    cells = 1 << length
    cuts = sorted(draw(st.lists(st.integers(0, 1 << exp), min_size=cells - 1, max_size=cells - 1)))
    edges = [0] + cuts + [1 << exp]
    return ExactDist(length, np.diff(edges), exp)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_tv_metric_properties(data):
    L = data.draw(st.integers(1, 4))
    p, q, r = (data.draw(dists(L)) for _ in range(3))
    d = tv_distance(p, q)
    assert tv_distance(p, p) == 0
    assert 0 <= d <= 1
    assert d == tv_distance(q, p)
    assert tv_distance(p, r) <= d + tv_distance(q, r)
    assert tv_event_characterization_check(p, q)
    S = data.draw(st.lists(st.integers(0, L - 1), min_size=1, max_size=L, unique=True))
    assert tv_distance(marginal(p, S), marginal(q, S)) <= d


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_mix_marginal_commute(data):
    L = data.draw(st.integers(1, 4))
    ds = [data.draw(dists(L)) for _ in range(3)]
    k = data.draw(st.integers(0, 8))
    w = [Dyadic(k, 3), Dyadic(8 - k, 4), Dyadic(8 - k, 4)]
    S = data.draw(st.lists(st.integers(0, L - 1), min_size=1, max_size=L, unique=True))
    assert marginal(mix(w, ds), S) == mix(w, [marginal(d, S) for d in ds])
