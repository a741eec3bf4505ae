"""Analytic test functions used by the experiments.

Families
--------
``monomial``             ``z**degree``
``dirichlet_kernel``     ``sum_{k < n} z**k``
``szego``                normalized Szego kernel at the pole ``(r, h)``
``random_polynomial``    complex Gaussian Taylor coefficients, unit l2 norm
``lacunary``             ``sum_{j < terms} +-z**(2**j)`` with seeded signs
``near_boundary_power``  ``(1 - rho z)**(-alpha)``, ``rho < 1``

The default corpus lives in ``data/corpus.json`` and is regenerable from
that manifest alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .boundary import ANALYTIC_TOL, BoundaryGrid, BoundarySignal, unit_roots
from .core import Pole, szego_kernel
from .errors import ParameterError, ResolutionError

FAMILIES = (
    "monomial",
    "dirichlet_kernel",
    "szego",
    "random_polynomial",
    "lacunary",
    "near_boundary_power",
)
POLYNOMIAL_FAMILIES = ("monomial", "dirichlet_kernel", "random_polynomial")

MANIFEST_FORMAT = "tmbasis.corpus"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ZooSpec:
    family: str
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not self.name:
            object.__setattr__(self, "name", self.family)

    def __hash__(self):
        return hash((self.family, self.name, json.dumps(self.params, sort_keys=True)))

    @property
    def degree(self) -> int | None:
        """Polynomial degree, or ``None`` for non-polynomial families."""
        if self.family == "monomial":
            return int(self.params["degree"])
        if self.family == "dirichlet_kernel":
            return int(self.params["n"]) - 1
        if self.family == "random_polynomial":
            return int(self.params["degree"])
        if self.family == "lacunary":
            return 2 ** (int(self.params["terms"]) - 1)
        return None

    def taylor(self) -> np.ndarray | None:
        """Taylor coefficients for the polynomial families."""
        p = self.params
        if self.family == "monomial":
            c = np.zeros(int(p["degree"]) + 1, dtype=complex)
            c[-1] = 1.0
            return c
        if self.family == "dirichlet_kernel":
            return np.ones(int(p["n"]), dtype=complex)
        if self.family == "random_polynomial":
            rng = np.random.default_rng(int(p["seed"]))
            d = int(p["degree"])
            c = rng.standard_normal(d + 1) + 1j * rng.standard_normal(d + 1)
            return c / np.linalg.norm(c)
        if self.family == "lacunary":
            rng = np.random.default_rng(int(p["seed"]))
            terms = int(p["terms"])
            signs = rng.choice([-1.0, 1.0], size=terms)
            c = np.zeros(2 ** (terms - 1) + 1, dtype=complex)
            c[2 ** np.arange(terms)] = signs
            return c
        return None

    def to_dict(self) -> dict:
        return {"name": self.name, "family": self.family, "params": dict(self.params)}


def taylor_to_signal(coeffs, grid: BoundaryGrid) -> BoundarySignal:
    """Boundary samples of ``sum_k coeffs[k] z**k``."""
    coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
    if coeffs.size >= grid.size:
        raise ResolutionError(
            f"{coeffs.size} Taylor coefficients do not fit a grid of {grid.size} nodes"
        )
    full = np.zeros(grid.size, dtype=complex)
    full[:coeffs.size] = coeffs
    return BoundarySignal(grid, np.fft.ifft(full) * grid.size, analytic=True)


def realize(spec: ZooSpec, grid: BoundaryGrid) -> BoundarySignal:
    """Sample ``spec`` on ``grid``; raises :class:`ResolutionError` if the grid aliases it."""
    p = spec.params
    degree = spec.degree
    if degree is not None and grid.size <= 2 * degree:
        raise ResolutionError(
            f"{spec.name}: grid of {grid.size} nodes cannot resolve degree {degree}"
        )
    if spec.family == "monomial":
        return BoundarySignal(grid, unit_roots(grid.size, int(p["degree"])), analytic=True)
    coeffs = spec.taylor()
    if coeffs is not None:
        return taylor_to_signal(coeffs, grid)
    z = grid.points
    if spec.family == "szego":
        pole = Pole(float(p["r"]), float(p.get("h", 0.0)))
        values = szego_kernel(pole, z)
    else:
        rho = float(p["rho"])
        alpha = float(p["alpha"])
        if not 0.0 <= rho < 1.0:
            raise ParameterError(f"damping rho must lie in [0, 1), got {rho}")
        values = np.power(1.0 - rho * z, -alpha)
    sig = BoundarySignal(grid, values, analytic=True)
    if not sig.check_analytic(ANALYTIC_TOL):
        raise ResolutionError(
            f"{spec.name}: grid 2^{grid.log2_size} aliases the spectrum "
            f"(negative-frequency energy {sig.negative_energy_fraction():.2e})"
        )
    return sig


def load_manifest(path=None) -> list[ZooSpec]:
    """Read a corpus manifest; ``None`` loads the packaged default corpus."""
    if path is None:
        text = resources.files("tmbasis").joinpath("data/corpus.json").read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    if doc.get("format") != MANIFEST_FORMAT:
        raise ValueError("not a corpus manifest")
    if doc.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported corpus manifest version {doc.get('version')}")
    specs = [ZooSpec(m["family"], dict(m.get("params", {})), m.get("name", "")) for m in doc["members"]]
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("corpus member names must be unique")
    return specs


def dump_manifest(specs, path=None) -> str:
    doc = {"format": MANIFEST_FORMAT, "version": MANIFEST_VERSION,
           "members": [s.to_dict() for s in specs]}
    text = json.dumps(doc, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def default_corpus() -> list[ZooSpec]:
    return load_manifest(None)
