"""Takenaka-Malmquist systems on the unit disk with dyadic poles.

A TM system is fixed by a pole sequence ``a_1, a_2, ...`` inside the disk.
The ``m``-th member is a normalized Szego kernel at ``a_m`` multiplied by
the Blaschke product over the earlier poles::

    B_m(z) = sqrt(1 - |a_m|^2) / (1 - conj(a_m) z) * prod_{l<m} (z - a_l) / (1 - conj(a_l) z)

Three pole schemes are supported:

* ``POWER``: every pole is zero, so ``B_m(z) = z**(m-1)``.
* ``CASE1``: ``a_1 = 0`` and, for ``m = 2**j + k`` with ``0 <= k < 2**j``,
  ``a_m = r_j exp(2 pi i k / 2**j)``.
* ``CASE2``: ``a_1 = a_2 = 0`` and, for ``m = 2**(j-1) + k + 2`` with
  ``0 <= k < 2**(j-1)``, ``a_m = r_j exp(2 pi i k / 2**j)``.

In both dyadic schemes ``r_j = sqrt(1 - 2**-j)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import IndexOutOfRangeError, InvalidPoleError, ParameterError

TWO_PI = 2.0 * math.pi


def level_radius(j: int) -> float:
    """Radius ``sqrt(1 - 2**-j)`` of the level-``j`` poles."""
    return math.sqrt(1.0 - 2.0 ** (-j))


def level_gap(j: int) -> float:
    """``1 - r_j`` computed without cancellation."""
    t = 2.0 ** (-j)
    return t / (1.0 + math.sqrt(1.0 - t))


@dataclass(frozen=True)
class Pole:
    """A point ``r * exp(2 pi i h)`` of the open unit disk.

    ``h`` is the argument as a fraction of a full turn.  Keeping the polar
    pair avoids rounding ``r`` through a cartesian round-trip.
    """

    r: float
    h: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.r < 1.0) or not math.isfinite(self.r):
            raise InvalidPoleError(f"pole radius must lie in [0, 1), got {self.r!r}")
        if not (0.0 <= self.h < 1.0):
            raise InvalidPoleError(f"pole argument must lie in [0, 1), got {self.h!r}")

    @classmethod
    def from_complex(cls, a: complex) -> "Pole":
        a = complex(a)
        r = abs(a)
        if r >= 1.0:
            raise InvalidPoleError(f"|a| = {r} is not inside the unit disk")
        h = (math.atan2(a.imag, a.real) / TWO_PI) % 1.0 if r > 0 else 0.0
        return cls(r, 0.0 if h >= 1.0 else h)

    @property
    def value(self) -> complex:
        if self.r == 0.0:
            return 0j
        return self.r * complex(math.cos(TWO_PI * self.h), math.sin(TWO_PI * self.h))

    @property
    def gap(self) -> float:
        """``1 - |a|``."""
        return 1.0 - self.r


ZERO_POLE = Pole(0.0, 0.0)


class SchemeKind(str, enum.Enum):
    POWER = "power"
    CASE1 = "case1"
    CASE2 = "case2"


@dataclass(frozen=True, order=True)
class DyadicIndex:
    j: int
    k: int


@dataclass(frozen=True)
class Head:
    """One of the leading basis elements whose pole is zero (``B_1``, ``B_2``)."""

    position: int


BasisIndex = Union[Head, DyadicIndex]


@dataclass(frozen=True)
class PoleScheme:
    """A TM pole scheme truncated at dyadic level ``j_max``."""

    kind: SchemeKind
    j_max: int

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if int(self.j_max) != self.j_max or self.j_max < 1:
            raise ParameterError(f"j_max must be a positive integer, got {self.j_max!r}")

    @property
    def n_heads(self) -> int:
        return {SchemeKind.POWER: 0, SchemeKind.CASE1: 1, SchemeKind.CASE2: 2}[self.kind]

    def level_size(self, j: int) -> int:
        """Number of poles at level ``j``."""
        if self.kind is SchemeKind.CASE1:
            return 2**j
        if self.kind is SchemeKind.CASE2:
            return 2 ** (j - 1)
        raise IndexOutOfRangeError("the power basis has no dyadic levels")

    @property
    def capacity(self) -> int | None:
        """Largest valid linear index ``m`` (``None`` when unbounded)."""
        if self.kind is SchemeKind.POWER:
            return None
        return self.n_heads + sum(self.level_size(j) for j in range(1, self.j_max + 1))

    def check_index(self, idx: DyadicIndex) -> None:
        if self.kind is SchemeKind.POWER:
            raise IndexOutOfRangeError("the power basis has no dyadic indices")
        if not (1 <= idx.j <= self.j_max):
            raise IndexOutOfRangeError(f"level j={idx.j} outside 1..{self.j_max}")
        if not (0 <= idx.k < self.level_size(idx.j)):
            raise IndexOutOfRangeError(
                f"translate k={idx.k} outside 0..{self.level_size(idx.j) - 1} at level {idx.j}"
            )

    def check_linear(self, m: int) -> None:
        if m < 1:
            raise IndexOutOfRangeError(f"basis index must be >= 1, got {m}")
        cap = self.capacity
        if cap is not None and m > cap:
            raise IndexOutOfRangeError(
                f"basis index {m} exceeds capacity {cap} of {self.kind.value} with j_max={self.j_max}"
            )

    def indices(self) -> list[BasisIndex]:
        """All basis indices in enumeration order (heads, then j, then k)."""
        if self.kind is SchemeKind.POWER:
            raise IndexOutOfRangeError("the power basis has no dyadic indices")
        out: list[BasisIndex] = [Head(i) for i in range(1, self.n_heads + 1)]
        for j in range(1, self.j_max + 1):
            out.extend(DyadicIndex(j, k) for k in range(self.level_size(j)))
        return out

    def dyadic_indices(self) -> list[DyadicIndex]:
        return [i for i in self.indices() if isinstance(i, DyadicIndex)]

    @cached_property
    def _pole_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Radii and arguments of ``a_1 .. a_capacity``."""
        if self.kind is SchemeKind.POWER:
            raise IndexOutOfRangeError("power basis pole table is unbounded")
        r = np.zeros(self.capacity)
        h = np.zeros(self.capacity)
        pos = self.n_heads
        for j in range(1, self.j_max + 1):
            n = self.level_size(j)
            r[pos:pos + n] = level_radius(j)
            h[pos:pos + n] = np.arange(n) / 2.0**j
            pos += n
        return r, h

    def pole_arrays(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        """Radii and arguments of the first ``count`` poles."""
        if count < 0:
            raise ParameterError("count must be non-negative")
        if self.kind is SchemeKind.POWER:
            return np.zeros(count), np.zeros(count)
        self.check_linear(max(count, 1))
        r, h = self._pole_table
        return r[:count], h[:count]

    def pole(self, m: int) -> Pole:
        """The pole ``a_m`` for linear index ``m``."""
        self.check_linear(m)
        if self.kind is SchemeKind.POWER:
            return ZERO_POLE
        idx = linear_to_dyadic(self, m)
        if isinstance(idx, Head):
            return ZERO_POLE
        return pole_of(self, idx)


def pole_of(scheme: PoleScheme, idx: DyadicIndex) -> Pole:
    scheme.check_index(idx)
    return Pole(level_radius(idx.j), idx.k / 2.0**idx.j)


def linear_to_dyadic(scheme: PoleScheme, m: int) -> BasisIndex:
    """Map linear index ``m >= 1`` to a head marker or ``(j, k)``.

    The map does not look at ``j_max``; use ``scheme.check_linear`` for that.
    """
    if m < 1:
        raise ParameterError(f"linear index must be >= 1, got {m}")
    if scheme.kind is SchemeKind.POWER:
        raise IndexOutOfRangeError("the power basis has no dyadic indices")
    if m <= scheme.n_heads:
        return Head(m)
    if scheme.kind is SchemeKind.CASE1:
        j = m.bit_length() - 1
        return DyadicIndex(j, m - 2**j)
    t = m - 2
    j = t.bit_length()
    return DyadicIndex(j, t - 2 ** (j - 1))


def dyadic_to_linear(scheme: PoleScheme, idx: BasisIndex) -> int:
    if isinstance(idx, Head):
        if not 1 <= idx.position <= scheme.n_heads:
            raise IndexOutOfRangeError(f"{scheme.kind.value} has no head {idx.position}")
        return idx.position
    scheme.check_index(idx)
    if scheme.kind is SchemeKind.CASE1:
        return 2**idx.j + idx.k
    return 2 ** (idx.j - 1) + idx.k + 2


def _as_pole(a) -> Pole:
    return a if isinstance(a, Pole) else Pole.from_complex(a)


def szego_kernel(a, z):
    """Normalized Szego kernel ``sqrt(1-|a|^2) / (1 - conj(a) z)``."""
    a = _as_pole(a)
    z = np.asarray(z, dtype=complex)
    out = math.sqrt((1.0 - a.r) * (1.0 + a.r)) / (1.0 - a.value.conjugate() * z)
    return out[()] if out.ndim == 0 else out


def blaschke_factor(a, z):
    """Mobius factor ``(z - a) / (1 - conj(a) z)``; unimodular on ``|z| = 1``."""
    a = _as_pole(a)
    z = np.asarray(z, dtype=complex)
    av = a.value
    out = (z - av) / (1.0 - av.conjugate() * z)
    return out[()] if out.ndim == 0 else out


def tm_basis_eval(scheme: PoleScheme, m: int, z):
    """Evaluate ``B_m`` at points ``z`` of the closed disk."""
    scheme.check_linear(m)
    z = np.asarray(z, dtype=complex)
    if scheme.kind is SchemeKind.POWER:
        out = z ** (m - 1)
        return out[()] if out.ndim == 0 else out
    r, h = scheme.pole_arrays(m)
    poles = r * np.exp(1j * TWO_PI * h)
    poles[r == 0] = 0
    prod = np.ones_like(z)
    for a in poles[:-1]:
        prod = prod * ((z - a) / (1.0 - np.conj(a) * z))
    a = poles[-1]
    out = np.sqrt((1.0 - r[-1]) * (1.0 + r[-1])) / (1.0 - np.conj(a) * z) * prod
    return out[()] if out.ndim == 0 else out


def basis_matrix(scheme: PoleScheme, count: int, x: np.ndarray) -> np.ndarray:
    """Rows ``B_1 .. B_count`` sampled at boundary points ``exp(2 pi i x)``.

    The Blaschke product is accumulated in enumeration order, one factor per
    row, so the cost is ``O(count * len(x))``.
    """
    x = np.asarray(x, dtype=float)
    z = np.exp(1j * TWO_PI * x)
    out = np.empty((count, x.size), dtype=complex)
    if count == 0:
        return out
    if scheme.kind is SchemeKind.POWER:
        out[0] = 1.0
        for m in range(1, count):
            out[m] = out[m - 1] * z
        return out
    r, h = scheme.pole_arrays(count)
    prod = np.ones_like(z)
    for m in range(count):
        if r[m] == 0.0:
            out[m] = prod
            prod = prod * z
            continue
        a = r[m] * np.exp(1j * TWO_PI * h[m])
        denom = 1.0 - np.conj(a) * z
        out[m] = (math.sqrt((1.0 - r[m]) * (1.0 + r[m])) / denom) * prod
        prod = prod * ((z - a) / denom)
    return out


def boundary_modulus_sq(scheme: PoleScheme, idx: DyadicIndex, x):
    """``|B_{j,k}(exp(2 pi i x))|**2`` in closed form.

    Every Blaschke factor is unimodular on the circle, so only the Szego
    factor survives: ``(1 - r^2) / |1 - r exp(2 pi i (x - h))|^2``.
    """
    pole = pole_of(scheme, idx)
    x = np.asarray(x, dtype=float)
    return _poisson_weight(idx.j, pole.h, x)


def _poisson_weight(j: int, h, x):
    r = level_radius(j)
    gap = level_gap(j)
    s = np.sin(math.pi * (x - h))
    # |1 - r e^{i t}|^2 = (1 - r)^2 + 4 r sin^2(t / 2)
    denom = gap * gap + 4.0 * r * s * s
    out = 2.0 ** (-j) / denom
    return out[()] if np.ndim(out) == 0 else out


def level_modulus_sq(scheme: PoleScheme, j: int, x) -> np.ndarray:
    """``|B_{j,k}|**2`` for every ``k`` at level ``j``; shape ``(2**j or 2**(j-1), len(x))``."""
    if not 1 <= j <= scheme.j_max:
        raise IndexOutOfRangeError(f"level j={j} outside 1..{scheme.j_max}")
    n = scheme.level_size(j)
    h = (np.arange(n) / 2.0**j)[:, None]
    return _poisson_weight(j, h, np.asarray(x, dtype=float)[None, :])


def nonseparability_partial_sum(scheme: PoleScheme, M: int) -> float:
    """``sum_{m<=M} (1 - |a_m|)``."""
    return float(nonseparability_partial_sums(scheme, M)[-1])


def nonseparability_partial_sums(scheme: PoleScheme, M: int) -> np.ndarray:
    """Running partial sums for ``m = 1 .. M``."""
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M}")
    if scheme.kind is SchemeKind.POWER:
        return np.arange(1, M + 1, dtype=float)
    scheme.check_linear(M)
    parts = [np.ones(scheme.n_heads)]
    parts += [np.full(scheme.level_size(j), level_gap(j)) for j in range(1, scheme.j_max + 1)]
    return np.cumsum(np.concatenate(parts)[:M])
