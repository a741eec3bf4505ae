"""Experiment configuration documents.

A config is a flat JSON object.  Every field has a default, unknown keys
are rejected, and ``seed: null`` is resolved to a fresh random seed that
is then recorded in the run manifest.
"""

from __future__ import annotations

import json
import secrets
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .core import SchemeKind
from .errors import ParameterError, ResolutionError

CONFIG_FORMAT = "tmbasis.config"
MANIFEST_FORMAT = "tmbasis.run-manifest"
GRID_MARGIN = 6


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str = "case1"
    j_max: int = 8
    log2_size: int = 14
    ps: tuple[float, ...] = (1.33, 2.0, 3.0, 4.0)
    trials: int = 200
    seed: int | None = 0
    corpus: str | None = None
    output: str = "tmbasis-out"
    # subcommand-specific knobs
    n_basis: int = 16
    points: int = 16
    degrees: tuple[int, ...] = (16, 32, 64, 128, 256, 512, 1024)
    oversample: int = 8
    samples_per_cell: int = 64
    n_alpha: int = 100
    max_length: int = 12
    n_calibration: int = 200
    levels: int = 16
    gate_tol: float = 1e-8
    members: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        try:
            SchemeKind(self.scheme)
        except ValueError:
            raise ParameterError(
                f"scheme must be one of {[k.value for k in SchemeKind]}, got {self.scheme!r}"
            ) from None
        for name in ("j_max", "log2_size", "trials", "n_basis", "points", "oversample",
                     "samples_per_cell", "n_alpha", "max_length", "n_calibration", "levels"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ParameterError(f"{name} must be a positive integer, got {v!r}")
        object.__setattr__(self, "ps", tuple(float(p) for p in self.ps))
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))
        object.__setattr__(self, "members", tuple(str(m) for m in self.members))
        if not self.ps or any(not p > 1.0 for p in self.ps):
            raise ParameterError(f"every p must exceed 1, got {list(self.ps)}")
        if self.seed is not None and (isinstance(self.seed, bool) or not isinstance(self.seed, int)
                                      or not 0 <= self.seed < 2**64):
            raise ParameterError(f"seed must be a 64-bit unsigned integer or null, got {self.seed!r}")
        if self.kind is not SchemeKind.POWER and self.log2_size < self.j_max + GRID_MARGIN:
            raise ResolutionError(
                f"log2_size={self.log2_size} is too coarse for j_max={self.j_max}; "
                f"use log2_size >= {self.j_max + GRID_MARGIN}"
            )

    @property
    def kind(self) -> SchemeKind:
        return SchemeKind(self.scheme)

    def resolved(self) -> "ExperimentConfig":
        """A copy with a concrete seed."""
        if self.seed is not None:
            return self
        return replace(self, seed=secrets.randbits(64))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("ps", "degrees", "members"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ParameterError("config must be a JSON object")
        doc = {k: v for k, v in doc.items() if k != "format"}
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ParameterError(f"unknown config keys {unknown}; allowed: {sorted(known)}")
        for k in ("ps", "degrees", "members"):
            if k in doc:
                if not isinstance(doc[k], list):
                    raise ParameterError(f"{k} must be a list")
                doc[k] = tuple(doc[k])
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps({"format": CONFIG_FORMAT, **self.to_dict()}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config is not valid JSON ({exc})") from None
        if isinstance(doc, dict) and doc.get("format") == MANIFEST_FORMAT:
            doc = doc.get("config")
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ParameterError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_json(text)
