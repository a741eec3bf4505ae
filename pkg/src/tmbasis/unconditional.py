"""Sign-flip experiments: Khintchine moments, scrambled TM expansions,
the power-basis counterexample, and the boundary-bound scans.

Random signs come from a counter-based generator (Philox keyed by the
master seed, with the draw index in the second counter word), so the
pattern of draw ``t`` never depends on how many other draws were made or
in which order.  Bit ``i`` of the raw stream is the sign of basis index
``i`` (a set bit means ``-1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from ._parallel import chunk_ranges, ordered_map
from .boundary import BoundaryGrid, BoundarySignal, _lp, lp_norm
from .core import (PoleScheme, SchemeKind, _poisson_weight, level_gap,
                   level_radius)
from .errors import IndexOutOfRangeError, ParameterError
from .norms import CoefficientTree, analyze, synthesize, synthesize_many

#: Sequences up to this length are averaged over every sign pattern.
EXHAUSTIVE_LIMIT = 20

_MASK64 = (1 << 64) - 1


def sign_bits(seed: int, draw: int, size: int) -> np.ndarray:
    """``size`` fair signs (``int8``, values +-1) for ``(seed, draw)``."""
    if size < 0:
        raise ParameterError("size must be non-negative")
    if draw < 0:
        raise ParameterError("draw index must be non-negative")
    bg = np.random.Philox(key=int(seed) & _MASK64, counter=[0, int(draw), 0, 0])
    words = bg.random_raw((size + 63) // 64).astype("<u8")
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")[:size]
    return (1 - 2 * bits.astype(np.int8)).astype(np.int8)


@dataclass(frozen=True, eq=False)
class SignPattern:
    """A +-1 value per basis index, reproducible from ``(seed, draw)``."""

    values: np.ndarray
    seed: int | None = None
    draw: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int8)
        if v.ndim != 1 or not np.all(np.abs(v) == 1):
            raise ParameterError("sign pattern entries must be exactly +1 or -1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, seed: int, draw: int, size: int) -> "SignPattern":
        return cls(sign_bits(seed, draw, size), seed, draw)

    @classmethod
    def ones(cls, size: int) -> "SignPattern":
        return cls(np.ones(size, dtype=np.int8))

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        return isinstance(other, SignPattern) and np.array_equal(self.values, other.values)


def sign_matrix(seed: int, draws: Sequence[int], size: int) -> np.ndarray:
    return np.stack([sign_bits(seed, d, size) for d in draws]) if len(draws) else \
        np.zeros((0, size), dtype=np.int8)


def apply_signs(tree: CoefficientTree, omega: SignPattern) -> CoefficientTree:
    """Multiply every coefficient, heads included, by its sign."""
    if len(omega) != len(tree):
        raise IndexOutOfRangeError(
            f"sign pattern covers {len(omega)} indices but the tree has {len(tree)}"
        )
    return tree.with_vector(tree.vector() * omega.values)


@dataclass
class RatioReport:
    p: float
    n_trials: int
    min_ratio: float
    max_ratio: float
    mean_ratio: float
    records: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    stderr: float | None = None
    exhaustive: bool = False
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_ratios(cls, p: float, ratios, **meta) -> "RatioReport":
        r = np.asarray(ratios, dtype=float)
        if r.size == 0:
            raise ParameterError("no trials")
        stderr = float(r.std(ddof=1) / math.sqrt(r.size)) if r.size > 1 else 0.0
        return cls(float(p), int(r.size), float(r.min()), float(r.max()), float(r.mean()),
                   r, stderr, False, dict(meta))

    @property
    def spread(self) -> float:
        return self.max_ratio / self.min_ratio


def _pattern_block(n: int, start: int, stop: int) -> np.ndarray:
    """Sign rows for pattern numbers ``start..stop-1`` with the first sign fixed to +1."""
    codes = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(n - 1, dtype=np.int64)[None, :]) & 1
    out = np.ones((stop - start, n), dtype=float)
    out[:, 1:] = 1.0 - 2.0 * bits
    return out


def khintchine_ratio(alpha, p: float, n_trials: int = 20000, seed: int = 0,
                     exhaustive: bool | None = None) -> RatioReport:
    """``(E |sum alpha_i w_i|^p)^(1/p) / ||alpha||_2`` over fair signs ``w``.

    Sequences of length ``<= EXHAUSTIVE_LIMIT`` are averaged exactly over
    all sign patterns (``w`` and ``-w`` give the same modulus, so half of
    them suffice); longer ones are sampled.
    """
    a = np.asarray(alpha, dtype=complex).reshape(-1)
    p = float(p)
    if not (p > 0) or not math.isfinite(p):
        raise ParameterError(f"p must lie in (0, inf), got {p}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0:
        raise ParameterError("the ratio is undefined for the zero sequence")
    a = a / scale
    if not np.any(np.iscomplex(a)):
        a = a.real
    # l2 from the same moduli as |S| so a single term gives exactly 1
    l2 = math.sqrt(float(np.sum(np.abs(a) ** 2)))
    if exhaustive is None:
        exhaustive = a.size <= EXHAUSTIVE_LIMIT
    if exhaustive:
        if a.size > EXHAUSTIVE_LIMIT:
            raise ParameterError(f"exhaustive mode is limited to {EXHAUSTIVE_LIMIT} terms")
        count = 1 << (a.size - 1)
        total = 0.0
        for r in chunk_ranges(count, 1 << 14):
            s = _pattern_block(a.size, r.start, r.stop) @ a
            total += float(np.sum((np.abs(s) / l2) ** p))
        ratio = (total / count) ** (1.0 / p)
        return RatioReport(p, count, ratio, ratio, ratio, np.array([ratio]), 0.0, True)
    if n_trials < 2:
        raise ParameterError("Monte-Carlo mode needs at least two trials")
    moments = np.empty(n_trials)
    for r in chunk_ranges(n_trials, 4096):
        w = sign_matrix(seed, list(r), a.size).astype(float)
        moments[r.start:r.stop] = (np.abs(w @ a) / l2) ** p
    mean = float(moments.mean())
    ratio = mean ** (1.0 / p)
    # delta method for g(m) = m^(1/p)
    se_mean = float(moments.std(ddof=1)) / math.sqrt(n_trials)
    stderr = ratio / (p * mean) * se_mean if mean > 0 else 0.0
    return RatioReport(p, n_trials, ratio, ratio, ratio, np.array([ratio]), stderr, False)


def _gaussian_constant(p: float) -> float:
    """``(E|G|^p)^(1/p)`` for a standard real Gaussian."""
    return math.sqrt(2.0) * math.exp((gammaln((p + 1) / 2) - 0.5 * math.log(math.pi)) / p)


def khintchine_sharp_bounds(p: float) -> tuple[float, float]:
    """Best constants for real coefficients (Haagerup's values)."""
    if p >= 2.0:
        return 1.0, _gaussian_constant(p)
    p0 = brentq(lambda t: gammaln((t + 1) / 2) - math.log(math.sqrt(math.pi) / 2), 1.0, 1.9)
    lo = 2.0 ** (0.5 - 1.0 / p) if p <= p0 else _gaussian_constant(p)
    return lo, 1.0


def random_alphas(seed: int, count: int, max_len: int, stream: int = 0) -> list[np.ndarray]:
    """Real Gaussian coefficient vectors with lengths uniform on ``1..max_len``.

    ``stream`` separates independent sets drawn from one master seed.
    """
    rng = np.random.default_rng([int(seed), int(stream)])
    return [rng.standard_normal(int(rng.integers(1, max_len + 1))) for _ in range(count)]


def calibration_alphas(seed: int, n_random: int = 200, max_len: int = 12) -> list[np.ndarray]:
    """Flat vectors ``(1, ..., 1)`` of every length up to ``max_len`` plus random ones."""
    return [np.ones(n) for n in range(1, max_len + 1)] + random_alphas(seed, n_random, max_len, 0)


def khintchine_band(p: float, seed: int, n_random: int = 200, max_len: int = 12) -> tuple[float, float]:
    """Fit ``[C'_p, C_p]`` once as the range of exhaustive ratios over :func:`calibration_alphas`."""
    ratios = [khintchine_ratio(a, p).mean_ratio for a in calibration_alphas(seed, n_random, max_len)]
    return min(ratios), max(ratios)


def scramble_experiment_multi(f: BoundarySignal, scheme: PoleScheme, ps: Sequence[float],
                              n_trials: int, seed: int, identity: bool = False,
                              threads: int | None = None,
                              tree: CoefficientTree | None = None) -> dict[float, RatioReport]:
    """``||T_w P f||_p / ||P f||_p`` for ``n_trials`` sign patterns ``w``.

    ``P f`` is the expansion of ``f`` truncated at the scheme's ``j_max``;
    the same patterns serve every exponent.
    """
    if n_trials < 1:
        raise ParameterError("need at least one trial")
    if tree is None:
        tree = analyze(f, scheme, threads=threads)
    grid = f.grid
    pf = synthesize(tree, grid)
    vec = tree.vector()
    if identity:
        signs = np.ones((n_trials, vec.size), dtype=np.int8)
    else:
        signs = sign_matrix(seed, range(n_trials), vec.size)
    values = synthesize_many(tree.scheme, signs * vec[None, :], grid, threads)
    mod = np.abs(values)
    out = {}
    for p in ps:
        ref = lp_norm(pf, p)
        norms = np.atleast_1d(_lp(mod, float(p), axis=1))
        out[float(p)] = RatioReport.from_ratios(
            p, norms / ref,
            reference_norm=ref,
            truncation_ratio=ref / lp_norm(f, p),
            tail_fraction=tree.tail_fraction(),
            converged=tree.converged(),
        )
    return out


def scramble_experiment(f: BoundarySignal, scheme: PoleScheme, p: float, n_trials: int,
                        seed: int, identity: bool = False, threads: int | None = None) -> RatioReport:
    return scramble_experiment_multi(f, scheme, [p], n_trials, seed, identity, threads)[float(p)]


@dataclass
class CounterexampleRow:
    p: float
    n: int
    grid_size: int
    norm_f: float
    mean_norm_t: float
    stderr: float
    ratio: float


def counterexample_grid(n: int, oversample: int = 8) -> BoundaryGrid:
    return BoundaryGrid(max(4, math.ceil(math.log2(max(1, oversample * n)))))


def power_basis_counterexample(p: float, degrees: Sequence[int], n_trials: int, seed: int,
                               oversample: int = 8,
                               threads: int | None = None) -> list[CounterexampleRow]:
    """Dirichlet-type sums ``f_N = sum_{k<N} z^k`` against their sign-scrambled versions.

    For the power basis ``T_w`` flips Taylor coefficients, so ``T_w f_N`` is
    a random-sign polynomial whose ``L^p`` norm grows like ``sqrt(N)`` while
    ``||f_N||_p`` grows like ``N^(1-1/p)``.
    """
    if not degrees:
        raise ParameterError("empty degree list")
    if n_trials < 1:
        raise ParameterError("need at least one trial")
    rows = []
    for n in degrees:
        n = int(n)
        if n < 1:
            raise ParameterError(f"degree count must be positive, got {n}")
        grid = counterexample_grid(n, oversample)
        size = grid.size
        coeffs = np.zeros(size)
        coeffs[:n] = 1.0
        norm_f = lp_norm(np.fft.ifft(coeffs) * size, p)

        def block(r: range) -> np.ndarray:
            w = np.zeros((len(r), size))
            w[:, :n] = sign_matrix(seed, list(r), n)
            return np.atleast_1d(_lp(np.abs(np.fft.ifft(w, axis=1) * size), float(p), axis=1))

        norms = np.concatenate(ordered_map(block, chunk_ranges(n_trials, 32), threads))
        mean = float(norms.mean())
        stderr = float(norms.std(ddof=1) / math.sqrt(n_trials)) if n_trials > 1 else 0.0
        rows.append(CounterexampleRow(float(p), n, size, norm_f, mean, stderr, mean / norm_f))
    return rows


def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


@dataclass
class LevelBound:
    j: int
    c_level: float
    C_level: float


@dataclass
class LevelBoundScan:
    scheme: SchemeKind
    c_est: float
    C_est: float
    levels: list[LevelBound]


def _level_lower(j: int, samples: int) -> float:
    """``min |B_{j,k}|^2 / 2^j`` over ``I_{j,k}`` (endpoints included).

    ``|B_{j,k}|^2`` depends on ``x - h_{j,k}`` only, so every ``k`` gives the
    same minimum and the cell ``k = 0`` stands for all of them.
    """
    x = np.linspace(0.0, 1.0, samples) / 2.0**j
    return float(np.min(_poisson_weight(j, 0.0, x))) / 2.0**j


def _level_upper_full(j: int, samples: int) -> float:
    # with all 2^j poles present the level sum is 2^-j periodic, one cell suffices
    x = np.arange(samples) / (samples * 2.0**j)
    h = (np.arange(2**j) / 2.0**j)[:, None]
    total = np.sum(_poisson_weight(j, h, x[None, :]), axis=0)
    return float(np.max(total)) / 2.0**j


def _level_upper_half(j: int, samples: int) -> float:
    # poles k < 2^(j-1) only: the sum is a circular convolution of a pole
    # comb with the sampled kernel over the whole circle
    length = samples * 2**j
    kernel = _poisson_weight(j, 0.0, np.arange(length) / length)
    comb = np.zeros(length)
    comb[: samples * 2 ** (j - 1): samples] = 1.0
    total = np.fft.irfft(np.fft.rfft(comb) * np.fft.rfft(kernel), n=length)
    return float(np.max(total)) / 2.0**j


def level_sum_direct(scheme: PoleScheme, j: int, x) -> np.ndarray:
    """``sum_k |B_{j,k}(x)|^2`` by direct summation (reference path)."""
    h = (np.arange(scheme.level_size(j)) / 2.0**j)[:, None]
    return np.sum(_poisson_weight(j, h, np.asarray(x, float)[None, :]), axis=0)


def level_bound_scan(scheme: PoleScheme, j_max: int, samples_per_cell: int = 64) -> LevelBoundScan:
    """Empirical constants for the pointwise lower bound ``|B_{j,k}|^2 >= c 2^j``
    on ``I_{j,k}`` and the level-sum upper bound ``sum_k |B_{j,k}|^2 <= C 2^j``.
    """
    if samples_per_cell < 8:
        raise ParameterError("samples_per_cell must be at least 8")
    if scheme.kind is SchemeKind.POWER:
        raise ParameterError("the power basis has no dyadic levels")
    if j_max < 1:
        raise ParameterError("j_max must be positive")
    levels = []
    for j in range(1, j_max + 1):
        lower = _level_lower(j, samples_per_cell)
        if scheme.kind is SchemeKind.CASE1:
            upper = _level_upper_full(j, samples_per_cell)
        else:
            upper = _level_upper_half(j, samples_per_cell)
        levels.append(LevelBound(j, lower, upper))
    return LevelBoundScan(scheme.kind, min(b.c_level for b in levels),
                         max(b.C_level for b in levels), levels)


def lattice_level_sum(j: int) -> float:
    """Closed form of ``max_x sum_{k<2^j} |B_{j,k}|^2 / 2^j``: ``(1 + rho)/(1 - rho)``, ``rho = r_j^(2^j)``.

    Folding the Poisson kernel over the ``2^j``-th roots of unity gives a
    Poisson kernel of radius ``r_j^(2^j)`` in the variable ``z^(2^j)``.
    """
    rho = math.exp(2.0**j * math.log(level_radius(j)))
    return (1.0 + rho) / (1.0 - rho)


def lower_bound_closed_form(j: int) -> float:
    """``|B_{j,k}|^2 / 2^j`` at the far end of ``I_{j,k}``."""
    r = level_radius(j)
    gap = level_gap(j)
    s = math.sin(math.pi / 2.0**j)
    return 4.0**-j / (gap * gap + 4.0 * r * s * s)
