import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tmbasis.core import (DyadicIndex, Head, Pole, PoleScheme, SchemeKind,
                          basis_matrix, blaschke_factor, boundary_modulus_sq,
                          dyadic_to_linear, level_gap, linear_to_dyadic,
                          nonseparability_partial_sum, nonseparability_partial_sums,
                          pole_of, szego_kernel, tm_basis_eval)
from tmbasis.errors import IndexOutOfRangeError, InvalidPoleError, ParameterError

C1 = PoleScheme(SchemeKind.CASE1, 6)
C2 = PoleScheme(SchemeKind.CASE2, 7)
PW = PoleScheme(SchemeKind.POWER, 1)
R1 = math.sqrt(0.5)

# 40-digit evaluation of the defining product at z = exp(2 pi i 0.3)
MP_CASE1 = {
    2: -0.37093550241994633 + 0.3471827302798474j,
    5: -1.5408678781723433 + 0.2438940866154737j,
    11: 0.28804659592744164 - 0.7195563192891028j,
    40: -0.3425172519375331 + 0.45409589610435486j,
}
MP_CASE2 = {
    3: -0.21556502391301874 - 0.4600659905116732j,
    7: 0.1174045736019057 - 0.3287685016596935j,
    20: 0.08427417202653863 - 0.10060868836967103j,
    40: 0.05679616569719236 - 0.08707307009921691j,
}


def test_pole_examples():
    assert pole_of(C1, DyadicIndex(1, 0)) == Pole(R1, 0.0)
    assert pole_of(C1, DyadicIndex(1, 1)) == Pole(R1, 0.5)
    p = pole_of(C2, DyadicIndex(3, 2))
    assert p.r == pytest.approx(0.9354143466934853, abs=1e-15)
    assert p.h == 0.25


def test_pole_validation():
    with pytest.raises(InvalidPoleError):
        Pole(1.0, 0.0)
    with pytest.raises(InvalidPoleError):
        Pole(0.5, 1.0)
    with pytest.raises(IndexOutOfRangeError):
        pole_of(C1, DyadicIndex(1, 2))
    with pytest.raises(IndexOutOfRangeError):
        pole_of(C2, DyadicIndex(2, 2))


def test_gap_has_no_cancellation():
    assert level_gap(40) == pytest.approx(2.0**-41, rel=1e-12)


def test_index_maps():
    assert linear_to_dyadic(C1, 5) == DyadicIndex(2, 1)
    assert linear_to_dyadic(C2, 3) == DyadicIndex(1, 0)
    assert linear_to_dyadic(C2, 7) == DyadicIndex(3, 1)
    assert linear_to_dyadic(C1, 1) == Head(1)
    assert linear_to_dyadic(C2, 2) == Head(2)
    with pytest.raises(ParameterError):
        linear_to_dyadic(C1, 0)
    with pytest.raises(IndexOutOfRangeError):
        C1.check_linear(C1.capacity + 1)
    with pytest.raises(IndexOutOfRangeError):
        C1.pole(C1.capacity + 1)


@pytest.mark.parametrize("scheme", [C1, C2])
def test_index_round_trip_complete(scheme):
    for m, idx in enumerate(scheme.indices(), start=1):
        assert dyadic_to_linear(scheme, idx) == m
        assert linear_to_dyadic(scheme, m) == idx


def test_szego_and_factor_examples():
    a = Pole(R1, 0.0)
    assert szego_kernel(Pole(0.0, 0.0), 0.3 + 0.2j) == 1
    assert szego_kernel(a, 1.0) == pytest.approx(math.sqrt(2) + 1, rel=1e-14)
    assert szego_kernel(a, -1.0) == pytest.approx(math.sqrt(2) - 1, rel=1e-14)
    assert blaschke_factor(Pole(0.0, 0.0), 0.2 - 0.7j) == 0.2 - 0.7j
    b = Pole(0.6, 0.3)
    assert abs(blaschke_factor(b, b.value)) < 1e-15
    assert abs(abs(blaschke_factor(a, 1j)) - 1) < 1e-14


def test_basis_examples():
    z = cmath.exp(2j * math.pi * 0.37)
    assert tm_basis_eval(PW, 4, z) == pytest.approx(z**3, abs=1e-15)
    assert tm_basis_eval(C1, 1, z) == 1
    assert abs(tm_basis_eval(C1, 2, 1.0)) ** 2 == pytest.approx((1 + R1) / (1 - R1), rel=1e-13)
    assert tm_basis_eval(C2, 2, z) == pytest.approx(z, abs=1e-15)


@pytest.mark.parametrize("scheme,table", [(C1, MP_CASE1), (C2, MP_CASE2)])
def test_basis_against_high_precision(scheme, table):
    z = cmath.exp(2j * math.pi * 0.3)
    for m, ref in table.items():
        assert abs(tm_basis_eval(scheme, m, z) - ref) < 1e-13
    rows = basis_matrix(scheme, 40, np.array([0.3]))
    for m, ref in table.items():
        assert abs(rows[m - 1, 0] - ref) < 1e-13


def test_interior_value():
    assert abs(tm_basis_eval(C1, 7, 0.3 + 0.4j) - (0.05400121370034952 - 0.04171349761039887j)) < 1e-14


def test_modulus_examples():
    assert boundary_modulus_sq(C1, DyadicIndex(1, 0), 0.0) == pytest.approx(5.82842712474619, rel=1e-13)
    assert boundary_modulus_sq(C1, DyadicIndex(1, 0), 0.5) == pytest.approx(0.1715728752538099, rel=1e-13)


def test_nonseparability_examples():
    assert nonseparability_partial_sum(PoleScheme(SchemeKind.POWER, 1), 10) == 10
    assert nonseparability_partial_sum(C1, 1) == 1
    assert nonseparability_partial_sum(C1, 3) == pytest.approx(1 + 2 * (1 - R1), rel=1e-15)


def test_nonseparability_levels():
    scheme = PoleScheme(SchemeKind.CASE1, 16)
    sums = nonseparability_partial_sums(scheme, scheme.capacity)
    prev, m = 1.0, 1
    contributions = []
    for j in range(1, 17):
        m += 2**j
        contributions.append(sums[m - 1] - prev)
        prev = sums[m - 1]
        assert 0.5 * j <= prev <= 0.586 * j + 1
    assert all(0.5 < c <= 0.586 for c in contributions)
    assert all(b < a for a, b in zip(contributions, contributions[1:]))


@given(st.sampled_from(list(SchemeKind)), st.integers(1, 200),
       st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=64))
def test_products_unimodular(kind, m, xs):
    scheme = PoleScheme(kind, 8)
    z = np.exp(2j * np.pi * np.array(xs))
    prod = np.ones_like(z)
    for l in range(1, m):
        prod = prod * blaschke_factor(scheme.pole(l), z)
    assert np.max(np.abs(np.abs(prod) - 1)) < 1e-10


@given(st.integers(1, 8), st.data())
def test_modulus_consistency(j, data):
    k = data.draw(st.integers(0, 2**j - 1))
    t = np.array(data.draw(st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=16)))
    x = (k + t) / 2**j
    scheme = PoleScheme(SchemeKind.CASE1, 8)
    m = dyadic_to_linear(scheme, DyadicIndex(j, k))
    direct = np.abs(tm_basis_eval(scheme, m, np.exp(2j * np.pi * x))) ** 2
    exact = boundary_modulus_sq(scheme, DyadicIndex(j, k), x)
    assert np.max(np.abs(direct - exact) / exact) < 1e-10


@given(st.sampled_from([SchemeKind.CASE1, SchemeKind.CASE2]), st.integers(1, 12), st.data())
def test_round_trip_property(kind, j_max, data):
    scheme = PoleScheme(kind, j_max)
    m = data.draw(st.integers(1, scheme.capacity))
    assert dyadic_to_linear(scheme, linear_to_dyadic(scheme, m)) == m


@given(st.integers(1, 12), st.floats(0.0, 1.0))
def test_basis_bounded_in_closed_disk(j_max, rad):
    scheme = PoleScheme(SchemeKind.CASE1, j_max)
    # |B_m| <= sqrt((1+r)/(1-r)) on the closed disk
    m = scheme.capacity
    r = scheme.pole(m).r
    val = tm_basis_eval(scheme, m, rad * cmath.exp(0.7j))
    assert math.isfinite(abs(val))
    assert abs(val) <= math.sqrt((1 + r) / (1 - r)) * (1 + 1e-9)
