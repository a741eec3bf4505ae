"""Fast invariant suite behind ``tmbasis --self-check``."""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np

from .boundary import BoundaryGrid, BoundarySignal, hl_maximal, hl_maximal_reference
from .core import (PoleScheme, SchemeKind, blaschke_factor,
                   boundary_modulus_sq, linear_to_dyadic, nonseparability_partial_sum,
                   tm_basis_eval)
from .experiments import gram_matrix
from .norms import CoefficientTree, analyze, synthesize
from .unconditional import (khintchine_ratio, level_bound_scan, power_basis_counterexample,
                            scramble_experiment, sign_bits)
from .zoo import ZooSpec, realize


def _unimodular() -> float:
    x = np.random.default_rng(1).random(64)
    z = np.exp(2j * np.pi * x)
    worst = 0.0
    for kind in SchemeKind:
        scheme = PoleScheme(kind, 8)
        prod = np.ones_like(z)
        for m in range(1, 201):
            worst = max(worst, float(np.max(np.abs(np.abs(prod) - 1.0))))
            prod = prod * blaschke_factor(scheme.pole(m), z)
    return worst


def _modulus_consistency() -> float:
    scheme = PoleScheme(SchemeKind.CASE1, 6)
    worst = 0.0
    for m in range(2, scheme.capacity + 1):
        idx = linear_to_dyadic(scheme, m)
        x = (idx.k + np.arange(16) / 16) / 2.0**idx.j
        exact = boundary_modulus_sq(scheme, idx, x)
        direct = np.abs(tm_basis_eval(scheme, m, np.exp(2j * np.pi * x))) ** 2
        worst = max(worst, float(np.max(np.abs(direct - exact) / exact)))
    return worst


def _gram() -> float:
    grid = BoundaryGrid(12)
    return max(float(np.max(np.abs(gram_matrix(PoleScheme(k, 5), 32, grid) - np.eye(32))))
               for k in SchemeKind)


def _round_trip() -> float:
    scheme = PoleScheme(SchemeKind.CASE2, 6)
    rng = np.random.default_rng(3)
    vec = rng.standard_normal(scheme.capacity) + 1j * rng.standard_normal(scheme.capacity)
    tree = CoefficientTree.from_vector(scheme, vec)
    back = analyze(synthesize(tree, BoundaryGrid(12)), scheme)
    return float(np.max(np.abs(back.vector() - vec)))


def _maximal() -> float:
    f = BoundarySignal(BoundaryGrid(6), np.random.default_rng(4).standard_normal(64))
    return float(np.max(np.abs(hl_maximal(f).values - hl_maximal_reference(f).values)))


def _khintchine() -> float:
    return max(abs(khintchine_ratio([1, 1], 4).mean_ratio - 2**0.25),
               abs(khintchine_ratio([3.5], 1.5).mean_ratio - 1.0))


def _level_bounds() -> float:
    res = level_bound_scan(PoleScheme(SchemeKind.CASE1, 1), 1)
    r = math.sqrt(0.5)
    return max(abs(res.c_est - (1 - r) / (1 + r) / 2), abs(res.C_est - 3.0))


def _nonsep() -> float:
    scheme = PoleScheme(SchemeKind.CASE1, 16)
    exact = 1.0 + sum(2**j * (1 - math.sqrt(1 - 2.0**-j)) for j in range(1, 17))
    return abs(nonseparability_partial_sum(scheme, scheme.capacity) - exact)


def _signs() -> float:
    a, b = sign_bits(42, 7, 300), sign_bits(42, 7, 300)
    return 0.0 if np.array_equal(a, b) and set(np.unique(a)) <= {-1, 1} else 1.0


def _neutrality() -> float:
    f = realize(ZooSpec("dirichlet_kernel", {"n": 8}), BoundaryGrid(11))
    rep = scramble_experiment(f, PoleScheme(SchemeKind.CASE1, 5), 2.0, 16, seed=5)
    return max(abs(rep.max_ratio - 1), abs(rep.min_ratio - 1))


def _counterexample() -> float:
    rows = power_basis_counterexample(4.0, [1, 2], 8, seed=0)
    return max(abs(r.ratio - 1.0) for r in rows)


CHECKS: list[tuple[str, Callable[[], float], float]] = [
    ("blaschke products are unimodular on the circle", _unimodular, 1e-10),
    ("closed-form |B_jk|^2 matches direct evaluation", _modulus_consistency, 1e-10),
    ("gram matrices are the identity", _gram, 1e-8),
    ("analyze inverts synthesize", _round_trip, 1e-8),
    ("maximal function matches brute force", _maximal, 0.0),
    ("khintchine reference values", _khintchine, 1e-14),
    ("level-one bound constants", _level_bounds, 1e-12),
    ("non-separability closed form", _nonsep, 1e-10),
    ("sign patterns are reproducible", _signs, 0.0),
    ("p = 2 scramble neutrality", _neutrality, 1e-6),
    ("counterexample base cases", _counterexample, 1e-12),
]


def run_self_check(echo: Callable[[str], None] = print) -> bool:
    ok = True
    t0 = time.perf_counter()
    for name, func, tol in CHECKS:
        err = func()
        passed = err <= tol
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name}  (error {err:.2e}, tolerance {tol:.0e})")
    echo(f"self-check {'passed' if ok else 'FAILED'} in {time.perf_counter() - t0:.1f} s")
    return ok
