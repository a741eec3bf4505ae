"""TM analysis coefficients and the equivalent H^p norms built from them.

For a dyadic scheme truncated at ``j_max`` a function ``f`` is described by
its head coefficients ``f_1 = <f, B_1>`` (and ``f_2 = <f, B_2>`` in Case 2)
plus ``c_{j,k} = <f, B_{j,k}>``.  Three scalar functionals are provided:

* :func:`hp_square_norm`: heads plus the ``L^p`` norm of
  ``(sum 2^j |c_{j,k}|^2 chi_{I_{j,k}})^(1/2)``, evaluated exactly cell by cell;
* :func:`np_functional`: the same with ``|B_{j,k}|^2`` in place of the
  dyadic weight ``2^j chi_{I_{j,k}}``;
* the ``L^p`` norm of the boundary values (see :mod:`tmbasis.boundary`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from ._parallel import chunk_ranges, ordered_map, single_threaded_blas
from .boundary import BoundaryGrid, BoundarySignal, _check_p, _lp, lp_norm
from .core import (DyadicIndex, Head, PoleScheme, SchemeKind, _poisson_weight,
                   basis_matrix)
from .errors import GridMismatchError, IndexOutOfRangeError, ParameterError

TREE_FORMAT = "tmbasis.coefficient-tree"
TREE_FORMAT_VERSION = 1

#: Relative energy of the deepest level below which a truncation counts as converged.
TAIL_TOL = 1e-6

_ROW_CHUNK = 64
_TRIAL_CHUNK = 8


@lru_cache(maxsize=4)
def _cached_basis(kind: SchemeKind, j_max: int, log2_size: int) -> np.ndarray:
    scheme = PoleScheme(kind, j_max)
    grid = BoundaryGrid(log2_size)
    rows = basis_matrix(scheme, scheme.capacity, grid.nodes)
    rows.setflags(write=False)
    return rows


def basis_rows(scheme: PoleScheme, grid: BoundaryGrid) -> np.ndarray:
    """All basis functions of ``scheme`` sampled on ``grid`` (read-only, cached)."""
    if scheme.kind is SchemeKind.POWER:
        raise ParameterError("coefficient trees need a dyadic scheme (case1 or case2)")
    return _cached_basis(scheme.kind, scheme.j_max, grid.log2_size)


def _level_offsets(scheme: PoleScheme) -> list[int]:
    offs = [0]
    for j in range(1, scheme.j_max + 1):
        offs.append(offs[-1] + scheme.level_size(j))
    return offs


@dataclass(eq=False)
class CoefficientTree:
    """Head coefficients plus dyadic coefficients in enumeration order.

    ``coeffs`` lists ``c_{j,k}`` with ``j`` ascending then ``k`` ascending,
    which is also the order of the basis rows after the heads.
    """

    scheme: PoleScheme
    heads: np.ndarray
    coeffs: np.ndarray
    reference_energy: float | None = None
    _offsets: list[int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.scheme.kind is SchemeKind.POWER:
            raise ParameterError("coefficient trees need a dyadic scheme (case1 or case2)")
        self.heads = np.array(self.heads, dtype=complex).reshape(-1)
        self.coeffs = np.array(self.coeffs, dtype=complex).reshape(-1)
        self._offsets = _level_offsets(self.scheme)
        if self.heads.size != self.scheme.n_heads:
            raise IndexOutOfRangeError(
                f"{self.scheme.kind.value} trees carry {self.scheme.n_heads} heads, got {self.heads.size}"
            )
        if self.coeffs.size != self._offsets[-1]:
            raise IndexOutOfRangeError(
                f"expected {self._offsets[-1]} dyadic coefficients, got {self.coeffs.size}"
            )

    @classmethod
    def zeros(cls, scheme: PoleScheme) -> "CoefficientTree":
        if scheme.kind is SchemeKind.POWER:
            raise ParameterError("coefficient trees need a dyadic scheme (case1 or case2)")
        return cls(scheme, np.zeros(scheme.n_heads), np.zeros(scheme.capacity - scheme.n_heads))

    @classmethod
    def from_vector(cls, scheme: PoleScheme, vec, reference_energy=None) -> "CoefficientTree":
        vec = np.asarray(vec, dtype=complex)
        return cls(scheme, vec[:scheme.n_heads], vec[scheme.n_heads:], reference_energy)

    @property
    def j_max(self) -> int:
        return self.scheme.j_max

    @property
    def head1(self) -> complex:
        return complex(self.heads[0])

    @property
    def head2(self) -> complex | None:
        return complex(self.heads[1]) if self.heads.size > 1 else None

    def __len__(self) -> int:
        return self.heads.size + self.coeffs.size

    def vector(self) -> np.ndarray:
        """Coefficients in linear basis order ``m = 1, 2, ...``."""
        return np.concatenate((self.heads, self.coeffs))

    def level(self, j: int) -> np.ndarray:
        if not 1 <= j <= self.j_max:
            raise IndexOutOfRangeError(f"level j={j} outside 1..{self.j_max}")
        return self.coeffs[self._offsets[j - 1]:self._offsets[j]]

    def __getitem__(self, idx) -> complex:
        if isinstance(idx, tuple):
            idx = DyadicIndex(*idx)
        if isinstance(idx, Head):
            if not 1 <= idx.position <= self.heads.size:
                raise IndexOutOfRangeError(f"no head {idx.position}")
            return complex(self.heads[idx.position - 1])
        self.scheme.check_index(idx)
        return complex(self.coeffs[self._offsets[idx.j - 1] + idx.k])

    def as_dict(self) -> dict[DyadicIndex, complex]:
        return {idx: self[idx] for idx in self.scheme.dyadic_indices()}

    def level_energy(self) -> np.ndarray:
        """Entry 0 is the head energy, entry ``j`` the level-``j`` energy."""
        out = [float(np.sum(np.abs(self.heads) ** 2))]
        out += [float(np.sum(np.abs(self.level(j)) ** 2)) for j in range(1, self.j_max + 1)]
        return np.array(out)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.vector()) ** 2))

    def tail_fraction(self) -> float:
        """Energy of the deepest level relative to ``||f||_2^2`` (or the tree's own energy)."""
        total = self.reference_energy if self.reference_energy else self.energy()
        if total == 0.0:
            return 0.0
        return float(self.level_energy()[-1] / total)

    def converged(self, tol: float = TAIL_TOL) -> bool:
        return self.tail_fraction() <= tol

    def with_vector(self, vec) -> "CoefficientTree":
        return CoefficientTree.from_vector(self.scheme, vec, self.reference_energy)

    def to_json(self) -> str:
        doc = {
            "format": TREE_FORMAT,
            "version": TREE_FORMAT_VERSION,
            "scheme": self.scheme.kind.value,
            "j_max": self.j_max,
            "reference_energy": self.reference_energy,
            "heads": [[float(c.real), float(c.imag)] for c in self.heads],
            "coefficients": [
                {"j": idx.j, "k": idx.k, "re": float(c.real), "im": float(c.imag)}
                for idx, c in zip(self.scheme.dyadic_indices(), self.coeffs)
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "CoefficientTree":
        doc = json.loads(text)
        if doc.get("format") != TREE_FORMAT:
            raise ValueError("not a coefficient tree document")
        if doc.get("version") != TREE_FORMAT_VERSION:
            raise ValueError(f"unsupported tree format version {doc.get('version')}")
        scheme = PoleScheme(SchemeKind(doc["scheme"]), int(doc["j_max"]))
        tree = cls.zeros(scheme)
        tree.reference_energy = doc.get("reference_energy")
        tree.heads = np.array([complex(re, im) for re, im in doc["heads"]], dtype=complex)
        seen = set()
        for rec in doc["coefficients"]:
            idx = DyadicIndex(int(rec["j"]), int(rec["k"]))
            scheme.check_index(idx)
            seen.add(idx)
            tree.coeffs[tree._offsets[idx.j - 1] + idx.k] = complex(rec["re"], rec["im"])
        if len(seen) != tree.coeffs.size or tree.heads.size != scheme.n_heads:
            raise IndexOutOfRangeError("tree document does not cover the complete index set")
        return tree

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "CoefficientTree":
        return cls.from_json(Path(path).read_text())


def analyze(f: BoundarySignal, scheme: PoleScheme, j_max: int | None = None,
            threads: int | None = None) -> CoefficientTree:
    """Inner products of ``f`` with every basis function up to level ``j_max``."""
    if j_max is not None and j_max != scheme.j_max:
        scheme = PoleScheme(scheme.kind, j_max)
    if not f.analytic:
        raise ParameterError("analyze expects a signal flagged analytic")
    f.grid.require_level(scheme.j_max)
    rows = basis_rows(scheme, f.grid)
    v = f.values
    n = f.size

    def block(r: range) -> np.ndarray:
        return rows[r.start:r.stop].conj() @ v / n

    parts = ordered_map(block, chunk_ranges(rows.shape[0], _ROW_CHUNK), threads)
    energy = float(np.mean(np.abs(v) ** 2))
    return CoefficientTree.from_vector(scheme, np.concatenate(parts), energy)


def synthesize(tree: CoefficientTree, grid: BoundaryGrid) -> BoundarySignal:
    """``sum_m c_m B_m`` sampled on ``grid``."""
    rows = basis_rows(tree.scheme, grid)
    with single_threaded_blas():
        values = tree.vector() @ rows
    return BoundarySignal(grid, values, analytic=True)


def synthesize_many(scheme: PoleScheme, vectors: np.ndarray, grid: BoundaryGrid,
                    threads: int | None = None) -> np.ndarray:
    """Row-wise synthesis of a ``(T, M)`` coefficient batch; returns ``(T, N)`` samples."""
    rows = basis_rows(scheme, grid)
    vectors = np.asarray(vectors, dtype=complex)
    if vectors.ndim != 2 or vectors.shape[1] != rows.shape[0]:
        raise GridMismatchError(f"expected coefficient batch with {rows.shape[0]} columns")
    parts = ordered_map(lambda r: vectors[r.start:r.stop] @ rows,
                        chunk_ranges(vectors.shape[0], _TRIAL_CHUNK), threads)
    return np.concatenate(parts) if parts else np.zeros((0, grid.size), dtype=complex)


def _dyadic_square_cells(tree: CoefficientTree) -> np.ndarray:
    """``sum_{j,k} 2^j |c_{j,k}|^2 chi_{I_{j,k}}`` on the ``2**j_max`` finest cells."""
    cells = 1 << tree.j_max
    acc = np.zeros(cells)
    for j in range(1, tree.j_max + 1):
        lev = np.abs(tree.level(j)) ** 2 * 2.0**j
        width = 1 << (tree.j_max - j)
        acc[:lev.size * width] += np.repeat(lev, width)
    return acc


def hp_square_norm(tree: CoefficientTree, p: float) -> float:
    """Heads plus the ``L^p`` norm of the dyadic square function.

    The integrand is constant on cells of length ``2**-j_max``, so the
    integral is an exact average over cells.
    """
    p = _check_p(p)
    heads = float(np.sum(np.abs(tree.heads)))
    return heads + float(_lp(np.sqrt(_dyadic_square_cells(tree)), p))


def np_functional(tree: CoefficientTree, p: float, grid: BoundaryGrid) -> float:
    """Heads plus ``|| (sum |c_{j,k}|^2 |B_{j,k}|^2)^(1/2) ||_{L^p}`` on ``grid``."""
    p = _check_p(p)
    return _heads_plus(tree, np_square(tree, grid), p)


def np_square(tree: CoefficientTree, grid: BoundaryGrid) -> np.ndarray:
    """``sum_{j,k} |c_{j,k}|^2 |B_{j,k}|^2`` sampled on ``grid``."""
    grid.require_level(tree.j_max)
    x = grid.nodes
    acc = np.zeros(grid.size)
    for j in range(1, tree.j_max + 1):
        w = np.abs(tree.level(j)) ** 2
        for r in chunk_ranges(w.size, 256):
            acc += w[r.start:r.stop] @ _level_block(j, r, x)
    return acc


def _heads_plus(tree: CoefficientTree, square: np.ndarray, p: float) -> float:
    return float(np.sum(np.abs(tree.heads))) + float(_lp(np.sqrt(square), p))


def _level_block(j: int, r: range, x: np.ndarray) -> np.ndarray:
    """``|B_{j,k}(x)|^2`` for ``k`` in ``r``, one row per ``k``."""
    h = (np.arange(r.start, r.stop) / 2.0**j)[:, None]
    return _poisson_weight(j, h, x[None, :])


@dataclass
class SquareFunctionStack:
    """Per-level pieces of the dyadic and TM square functions.

    ``f_levels[j-1]`` is ``f_j = sum_k 2^(j/2) |c_{j,k}| chi_{I_{j,k}}`` and
    ``bf_levels[j-1]`` is ``sum_k |c_{j,k}|^2 |B_{j,k}|^2``.
    """

    grid: BoundaryGrid
    heads: np.ndarray
    f_levels: list[np.ndarray]
    bf_levels: list[np.ndarray] | None = None

    def f_level(self, j: int) -> BoundarySignal:
        return BoundarySignal(self.grid, self.f_levels[j - 1])

    def sf(self) -> np.ndarray:
        """``Sf = (sum_j f_j^2)^(1/2)``."""
        return np.sqrt(np.sum(np.square(self.f_levels), axis=0))

    def bf(self) -> np.ndarray:
        if self.bf_levels is None:
            raise ValueError("stack was built without the bf levels")
        return np.sqrt(np.sum(self.bf_levels, axis=0))

    def sf_norm(self, p: float) -> float:
        """Heads plus ``||Sf||_p``; equals :func:`hp_square_norm` up to rounding."""
        return float(np.sum(np.abs(self.heads))) + float(_lp(self.sf(), _check_p(p)))

    def bf_norm(self, p: float) -> float:
        return float(np.sum(np.abs(self.heads))) + float(_lp(self.bf(), _check_p(p)))


def square_stack(tree: CoefficientTree, grid: BoundaryGrid, with_bf: bool = True) -> SquareFunctionStack:
    if grid.log2_size < tree.j_max:
        raise GridMismatchError("grid must resolve the finest dyadic cells")
    if with_bf:
        grid.require_level(tree.j_max)
    n = grid.size
    x = grid.nodes
    f_levels, bf_levels = [], []
    for j in range(1, tree.j_max + 1):
        lev = tree.level(j)
        cell = np.arange(n) >> (grid.log2_size - j)
        vals = np.zeros(n)
        inside = cell < lev.size
        vals[inside] = 2.0 ** (j / 2) * np.abs(lev[cell[inside]])
        f_levels.append(vals)
        if with_bf:
            w = np.abs(lev) ** 2
            bf = np.zeros(n)
            for r in chunk_ranges(w.size, 256):
                bf += w[r.start:r.stop] @ _level_block(j, r, x)
            bf_levels.append(bf)
    return SquareFunctionStack(grid, tree.heads.copy(), f_levels, bf_levels if with_bf else None)


def maximal_domination_gap(stack: SquareFunctionStack, tree: CoefficientTree) -> float:
    """Largest ``2^(j/2)|c_{j,k}| - M f_j(x)`` over ``x in I_{j,k}`` (should be <= 0)."""
    from .boundary import hl_maximal
    worst = -math.inf
    n = stack.grid.size
    for j in range(1, tree.j_max + 1):
        mf = hl_maximal(stack.f_level(j)).values.real
        cell = np.arange(n) >> (stack.grid.log2_size - j)
        lev = tree.level(j)
        inside = cell < lev.size
        gap = 2.0 ** (j / 2) * np.abs(lev[cell[inside]]) - mf[inside]
        worst = max(worst, float(np.max(gap)))
    return worst


@dataclass
class NormRecord:
    """Norm quantities of one function at one exponent."""

    name: str
    p: float
    lp_f: float
    lp_truncated: float
    hp_square: float
    np_value: float
    sf_value: float
    tail_fraction: float
    converged: bool
    degree: int | None = None

    @property
    def hp_ratio(self) -> float:
        return self.hp_square / self.lp_truncated

    @property
    def np_ratio(self) -> float:
        return self.np_value / self.lp_truncated

    @property
    def sf_over_np(self) -> float:
        return self.sf_value / self.np_value


def norm_records(name: str, f: BoundarySignal, scheme: PoleScheme, ps, degree: int | None = None,
                 threads: int | None = None) -> list[NormRecord]:
    """All norms of ``f`` and of its truncated expansion ``P f`` for each ``p``.

    Ratios are formed against ``||P f||_p`` because the square functions only
    see the coefficients up to ``j_max``.
    """
    tree = analyze(f, scheme, threads=threads)
    pf = synthesize(tree, f.grid)
    stack = square_stack(tree, f.grid, with_bf=False)
    bsq = np_square(tree, f.grid)
    out = []
    for p in ps:
        out.append(NormRecord(
            name=name, p=float(p),
            lp_f=lp_norm(f, p), lp_truncated=lp_norm(pf, p),
            hp_square=hp_square_norm(tree, p),
            np_value=_heads_plus(tree, bsq, _check_p(p)),
            sf_value=stack.sf_norm(p),
            tail_fraction=tree.tail_fraction(), converged=tree.converged(),
            degree=degree,
        ))
    return out


def fit_equivalence_constant(ratios) -> float:
    """Smallest ``C`` with every ratio in ``[1/C, C]``."""
    r = np.asarray(ratios, dtype=float)
    return float(max(r.max(), 1.0 / r.min()))


def degree_slope(degrees, ratios) -> float:
    """Least-squares slope of ``log ratio`` against ``log degree``."""
    d = np.asarray(degrees, dtype=float)
    r = np.asarray(ratios, dtype=float)
    if np.unique(d).size < 2 or np.any(d <= 0):
        raise ParameterError("need at least two distinct positive degrees")
    return float(np.polyfit(np.log(d), np.log(r), 1)[0])
