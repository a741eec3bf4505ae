"""Sampled boundary functions on the unit circle.

Points of the circle are parameterized by ``x in [0, 1)`` through
``z = exp(2 pi i x)``.  A :class:`BoundaryGrid` holds ``N = 2**J`` equally
spaced nodes ``x_n = n / N`` and a :class:`BoundarySignal` holds one complex
sample per node.  Integrals over the circle use the rectangle rule, which
is spectrally accurate for smooth periodic integrands.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d

from .errors import GridMismatchError, ParameterError, ResolutionError

SIGNAL_MAGIC = b"TMSG"
SIGNAL_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHBB")

#: Relative negative-frequency energy allowed for an analytic signal.
ANALYTIC_TOL = 1e-16


@dataclass(frozen=True)
class BoundaryGrid:
    log2_size: int

    def __post_init__(self):
        if int(self.log2_size) != self.log2_size or self.log2_size < 4:
            raise ParameterError(f"log2_size must be an integer >= 4, got {self.log2_size!r}")
        if self.log2_size > 30:
            raise ParameterError(f"log2_size {self.log2_size} is unreasonably large")

    @property
    def size(self) -> int:
        return 1 << self.log2_size

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.size) / self.size

    @property
    def points(self) -> np.ndarray:
        """``exp(2 pi i x_n)``, with the phase reduced exactly modulo 1."""
        return unit_roots(self.size, 1)

    def require_level(self, j_max: int, margin: int = 6) -> None:
        """Raise unless ``N >= 2**(j_max + margin)``."""
        if self.log2_size < j_max + margin:
            raise ResolutionError(
                f"grid 2^{self.log2_size} is too coarse for level {j_max}; "
                f"need log2_size >= {j_max + margin}"
            )


def unit_roots(size: int, freq: int) -> np.ndarray:
    """``exp(2 pi i freq n / size)`` for ``n < size`` with exact phase reduction."""
    n = (np.arange(size, dtype=np.int64) * int(freq)) % size
    return np.exp(2j * np.pi * n / size)


@dataclass(eq=False)
class BoundarySignal:
    """Samples ``f(exp(2 pi i x_n))`` of a boundary function."""

    grid: BoundaryGrid
    values: np.ndarray
    analytic: bool = False
    _coeffs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.size,):
            raise GridMismatchError(
                f"expected {self.grid.size} samples, got shape {values.shape}"
            )
        values.setflags(write=False)
        self.values = values

    @classmethod
    def from_function(cls, func, grid: BoundaryGrid, analytic: bool = False) -> "BoundarySignal":
        """Sample ``func(z)`` at the grid's boundary points."""
        return cls(grid, func(grid.points), analytic=analytic)

    @property
    def size(self) -> int:
        return self.grid.size

    def fourier(self) -> np.ndarray:
        """Coefficients in FFT order (index ``nu`` for ``nu >= 0``, ``N + nu`` for ``nu < 0``)."""
        if self._coeffs is None:
            c = np.fft.fft(self.values) / self.size
            c.setflags(write=False)
            self._coeffs = c
        return self._coeffs

    def negative_energy_fraction(self) -> float:
        c = self.fourier()
        total = float(np.sum(np.abs(c) ** 2))
        if total == 0.0:
            return 0.0
        neg = float(np.sum(np.abs(c[self.size // 2:]) ** 2))
        return neg / total

    def check_analytic(self, tol: float = ANALYTIC_TOL) -> bool:
        return self.negative_energy_fraction() <= tol

    def __mul__(self, c) -> "BoundarySignal":
        return BoundarySignal(self.grid, self.values * c, analytic=self.analytic)

    __rmul__ = __mul__

    def __add__(self, other: "BoundarySignal") -> "BoundarySignal":
        _same_grid(self, other)
        return BoundarySignal(self.grid, self.values + other.values,
                              analytic=self.analytic and other.analytic)

    def to_bytes(self) -> bytes:
        flags = 1 if self.analytic else 0
        head = _HEADER.pack(SIGNAL_MAGIC, SIGNAL_FORMAT_VERSION, self.grid.log2_size, flags)
        body = np.ascontiguousarray(self.values).view("<f8").astype("<f8").tobytes()
        return head + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "BoundarySignal":
        if len(data) < _HEADER.size:
            raise ValueError("truncated signal record")
        magic, version, log2_size, flags = _HEADER.unpack_from(data)
        if magic != SIGNAL_MAGIC:
            raise ValueError("not a tmbasis signal record")
        if version != SIGNAL_FORMAT_VERSION:
            raise ValueError(f"unsupported signal format version {version}")
        grid = BoundaryGrid(log2_size)
        body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
        if body.size != 2 * grid.size:
            raise ValueError(f"expected {2 * grid.size} floats, found {body.size}")
        return cls(grid, body[0::2] + 1j * body[1::2], analytic=bool(flags & 1))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "BoundarySignal":
        return cls.from_bytes(Path(path).read_bytes())


def _same_grid(f: BoundarySignal, g: BoundarySignal) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(
            f"grid mismatch: 2^{f.grid.log2_size} vs 2^{g.grid.log2_size}"
        )


def fourier_coefficients(f: BoundarySignal) -> dict[int, complex]:
    """``c(nu) = (1/N) sum_n f(x_n) exp(-2 pi i nu x_n)`` for ``-N/2 <= nu < N/2``."""
    c = f.fourier()
    n = f.size
    return {nu: complex(c[nu % n]) for nu in range(-n // 2, n // 2)}


def from_fourier(coeffs: np.ndarray, grid: BoundaryGrid, analytic: bool = False) -> BoundarySignal:
    """Inverse of :meth:`BoundarySignal.fourier` (FFT-ordered input)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape != (grid.size,):
        raise GridMismatchError(f"need {grid.size} coefficients, got {coeffs.shape}")
    return BoundarySignal(grid, np.fft.ifft(coeffs) * grid.size, analytic=analytic)


def inner_product(f: BoundarySignal, g: BoundarySignal) -> complex:
    """``int_0^1 f conj(g) dx`` by the rectangle rule."""
    _same_grid(f, g)
    return complex(np.vdot(g.values, f.values) / f.size)


def _check_p(p: float) -> float:
    p = float(p)
    if not (p > 1.0) or not math.isfinite(p):
        raise ParameterError(f"exponent p must lie in (1, inf), got {p}")
    return p


def lp_norm(f, p: float) -> float:
    """Discrete ``L^p`` norm ``((1/N) sum |f|^p)^(1/p)``; accepts signals or arrays."""
    p = _check_p(p)
    v = f.values if isinstance(f, BoundarySignal) else np.asarray(f)
    return _lp(np.abs(v), p)


def _lp(a: np.ndarray, p: float, axis=None):
    # rescale by the max so large samples cannot overflow a**p
    scale = np.max(a, axis=axis, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    out = np.mean((a / scale) ** p, axis=axis) ** (1.0 / p) * np.squeeze(scale, axis=axis)
    return float(out) if np.ndim(out) == 0 else out


def _wrapped_prefix(a: np.ndarray) -> np.ndarray:
    """Prefix sums of ``a`` repeated twice; window sums are differences of entries."""
    return np.concatenate(([0.0], np.cumsum(np.concatenate((a, a)))))


def _maximal_values(a: np.ndarray) -> np.ndarray:
    """Uncentered circular maximal function of the non-negative samples ``a``.

    For each window length ``L`` the window averages are formed from a
    wrapped prefix sum, then a sliding maximum of width ``L`` collects, at
    every node, the best window of that length covering it.
    """
    n = a.size
    prefix = _wrapped_prefix(a)
    out = a.astype(float)
    starts = np.arange(n)
    for length in range(1, n + 1):
        avg = (prefix[starts + length] - prefix[starts]) / length
        # window starting at s covers nodes s .. s+L-1; node t is covered by
        # starts t-L+1 .. t, i.e. a trailing window of width L
        best = maximum_filter1d(avg, size=length, mode="wrap", origin=(length - 1) // 2)
        np.maximum(out, best, out=out)
    return out


def hl_maximal(f: BoundarySignal) -> BoundarySignal:
    """Discrete Hardy-Littlewood maximal function on the circle.

    Takes the sup of node averages of ``|f|`` over all grid-aligned
    circular intervals of 1..N cells that contain the node.
    """
    return BoundarySignal(f.grid, _maximal_values(np.abs(f.values)))


def hl_maximal_reference(f: BoundarySignal) -> BoundarySignal:
    """Brute-force maximal function: every interval is enumerated explicitly.

    Window sums come from the same prefix array as :func:`hl_maximal`, so the
    two agree bit for bit; only the interval bookkeeping differs.
    """
    a = np.abs(f.values)
    n = a.size
    prefix = [float(v) for v in _wrapped_prefix(a)]
    out = [float(v) for v in a]
    for start in range(n):
        for length in range(1, n + 1):
            avg = (prefix[start + length] - prefix[start]) / length
            for t in range(start, start + length):
                if avg > out[t % n]:
                    out[t % n] = avg
    return BoundarySignal(f.grid, np.array(out))


def fs_vector_norm(fs: Sequence[BoundarySignal], p: float, q: float, maximal: bool = False) -> float:
    """``|| (sum_k |g_k|^q)^(1/q) ||_{L^p}`` with ``g_k = f_k`` or ``M f_k``."""
    p = _check_p(p)
    q = _check_p(q)
    if len(fs) == 0:
        return 0.0
    grid = fs[0].grid
    acc = np.zeros(grid.size)
    for f in fs:
        if f.grid != grid:
            raise GridMismatchError("all signals in a family must share one grid")
        g = hl_maximal(f).values.real if maximal else np.abs(f.values)
        acc += g ** q
    return _lp(acc ** (1.0 / q), p)


def maximal_family(fs: Sequence[BoundarySignal]) -> list[BoundarySignal]:
    return [hl_maximal(f) for f in fs]


def fefferman_stein_ratio(fs: Sequence[BoundarySignal], p: float, q: float,
                          maximal_fs: Sequence[BoundarySignal] | None = None) -> float:
    """``||{M f_k}||_{L^p(l^q)} / ||{f_k}||_{L^p(l^q)}`` (always >= 1)."""
    if maximal_fs is None:
        maximal_fs = maximal_family(fs)
    num = fs_vector_norm([BoundarySignal(m.grid, m.values) for m in maximal_fs], p, q)
    den = fs_vector_norm(fs, p, q)
    return num / den


def bump_family(grid: BoundaryGrid, size: int, rng: np.random.Generator) -> list[BoundarySignal]:
    """Random smooth non-negative bumps ``A exp(kappa (cos(2 pi (x - c)) - 1))``."""
    x = grid.nodes
    out = []
    for _ in range(size):
        c = rng.random()
        kappa = math.exp(rng.uniform(math.log(4.0), math.log(400.0)))
        amp = math.exp(rng.normal())
        out.append(BoundarySignal(grid, amp * np.exp(kappa * (np.cos(2 * np.pi * (x - c)) - 1.0))))
    return out


@dataclass
class FeffermanSteinFit:
    p: float
    q: float
    family_size: int
    constant: float
    ratios: np.ndarray = field(repr=False)


def fefferman_stein_fit(pqs: Sequence[tuple[float, float]], family_size: int, n_families: int,
                        seed: int, log2_size: int = 9) -> list[FeffermanSteinFit]:
    """Fit ``C`` in ``||{M f_k}|| <= C ||{f_k}||`` as the largest observed ratio.

    Families are random bump families drawn from ``default_rng(seed)``;
    every ``(p, q)`` pair is evaluated on the same families.
    """
    if family_size < 1 or n_families < 1:
        raise ValueError("family_size and n_families must be positive")
    grid = BoundaryGrid(log2_size)
    rng = np.random.default_rng(seed)
    ratios = np.empty((len(pqs), n_families))
    for t in range(n_families):
        fs = bump_family(grid, family_size, rng)
        ms = maximal_family(fs)
        for i, (p, q) in enumerate(pqs):
            ratios[i, t] = fefferman_stein_ratio(fs, p, q, ms)
    return [FeffermanSteinFit(float(p), float(q), family_size, float(ratios[i].max()), ratios[i])
            for i, (p, q) in enumerate(pqs)]
