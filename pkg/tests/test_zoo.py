import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tmbasis.boundary import BoundaryGrid, fourier_coefficients, lp_norm
from tmbasis.core import PoleScheme, SchemeKind
from tmbasis.errors import ParameterError, ResolutionError
from tmbasis.norms import hp_square_norm, analyze, synthesize
from tmbasis.zoo import (FAMILIES, ZooSpec, default_corpus, dump_manifest, load_manifest,
                         realize, taylor_to_signal)

G = BoundaryGrid(12)


def test_default_corpus():
    specs = default_corpus()
    assert len(specs) == 20
    assert {s.family for s in specs} == set(FAMILIES)


@pytest.mark.parametrize("spec", default_corpus(), ids=lambda s: s.name)
def test_members_are_analytic(spec):
    assert realize(spec, BoundaryGrid(14)).check_analytic()


def test_monomial():
    c = fourier_coefficients(realize(ZooSpec("monomial", {"degree": 3}), G))
    assert abs(c[3] - 1) < 1e-14


def test_szego_member():
    f = realize(ZooSpec("szego", {"r": math.sqrt(0.5), "h": 0.0}), G)
    c = fourier_coefficients(f)
    for nu in range(30):
        assert abs(c[nu] - math.sqrt(0.5) ** (nu + 1)) < 1e-14


def test_lacunary():
    f = realize(ZooSpec("lacunary", {"terms": 5, "seed": 3}), G)
    assert lp_norm(f, 2) == pytest.approx(math.sqrt(5))
    c = fourier_coefficients(f)
    assert {k for k, v in c.items() if abs(v) > 1e-12} == {1, 2, 4, 8, 16}


def test_taylor_examples():
    assert np.allclose(taylor_to_signal([1], G).values, 1)
    assert np.allclose(taylor_to_signal([0, 1], G).values, G.points)
    # (1 + z)^2: ||.||_4^4 = ||(1 + z)^4||_2^2 = sum C(4, k)^2 = 70
    assert lp_norm(taylor_to_signal([1, 2, 1], G), 4) == pytest.approx(70 ** 0.25, rel=1e-14)
    assert lp_norm(taylor_to_signal([1, 1], G), 4) == pytest.approx(6 ** 0.25, rel=1e-14)
    with pytest.raises(ResolutionError):
        taylor_to_signal(np.ones(G.size), G)


def test_bandwidth_violation():
    with pytest.raises(ResolutionError):
        realize(ZooSpec("monomial", {"degree": 8}), BoundaryGrid(4))
    with pytest.raises(ResolutionError):
        realize(ZooSpec("near_boundary_power", {"alpha": 1.0, "rho": 0.999}), BoundaryGrid(6))
    with pytest.raises(ParameterError):
        realize(ZooSpec("near_boundary_power", {"alpha": 1.0, "rho": 1.0}), G)
    with pytest.raises(ParameterError):
        ZooSpec("bogus")


def test_manifest_round_trip(tmp_path):
    specs = default_corpus()
    dump_manifest(specs, tmp_path / "c.json")
    again = load_manifest(tmp_path / "c.json")
    assert [s.to_dict() for s in again] == [s.to_dict() for s in specs]
    a = realize(again[13], G).values
    b = realize(specs[13], G).values
    assert np.array_equal(a, b)


def test_corpus_coverage():
    grid = BoundaryGrid(14)
    for kind in (SchemeKind.CASE1, SchemeKind.CASE2):
        scheme = PoleScheme(kind, 8)
        ratios = []
        for spec in default_corpus():
            t = analyze(realize(spec, grid), scheme)
            ratios.append(hp_square_norm(t, 4) / lp_norm(synthesize(t, grid), 4))
        assert max(ratios) / min(ratios) > 2


@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=60))
def test_taylor_recovered(coeffs):
    f = taylor_to_signal(coeffs, BoundaryGrid(7))
    c = fourier_coefficients(f)
    scale = 1 + max(abs(x) for x in coeffs)
    for k, v in enumerate(coeffs):
        assert abs(c[k] - v) <= 1e-12 * scale
