"""Runners behind the CLI subcommands.

Each runner maps an :class:`ExperimentConfig` with a resolved seed to a
:class:`RunResult`: a table (header plus rows), a JSON-ready summary and a
list of numerical gates.  Nothing here touches the file system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .boundary import BoundaryGrid
from .config import ExperimentConfig
from .core import (DyadicIndex, Head, PoleScheme, SchemeKind, basis_matrix,
                   boundary_modulus_sq, level_gap, linear_to_dyadic,
                   nonseparability_partial_sums)
from .errors import ParameterError
from .norms import (analyze, degree_slope, fit_equivalence_constant,
                    norm_records, synthesize)
from .unconditional import (calibration_alphas, khintchine_ratio,
                            khintchine_sharp_bounds, level_bound_scan,
                            loglog_slope, power_basis_counterexample,
                            random_alphas, scramble_experiment_multi)
from .zoo import POLYNOMIAL_FAMILIES, ZooSpec, load_manifest, realize

#: Tolerance for the p = 2 scramble neutrality gate.
NEUTRALITY_TOL = 1e-6


@dataclass
class Gate:
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class RunResult:
    header: list[str]
    rows: list[list]
    summary: dict = field(default_factory=dict)
    gates: list[Gate] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gates)


def _scheme(cfg: ExperimentConfig, j_max: int | None = None) -> PoleScheme:
    return PoleScheme(cfg.kind, cfg.j_max if j_max is None else j_max)


def _dyadic(cfg: ExperimentConfig, what: str) -> PoleScheme:
    if cfg.kind is SchemeKind.POWER:
        raise ParameterError(f"{what} needs scheme case1 or case2")
    return _scheme(cfg)


def corpus_members(cfg: ExperimentConfig) -> list[ZooSpec]:
    specs = load_manifest(cfg.corpus)
    if cfg.members:
        by_name = {s.name: s for s in specs}
        missing = [m for m in cfg.members if m not in by_name]
        if missing:
            raise ParameterError(f"corpus has no members named {missing}")
        specs = [by_name[m] for m in cfg.members]
    return specs


def _index_label(idx) -> tuple[str, object, object]:
    if isinstance(idx, DyadicIndex):
        return f"({idx.j},{idx.k})", idx.j, idx.k
    if isinstance(idx, Head):
        return f"head{idx.position}", "", ""
    return "power", "", ""


def run_basis_eval(cfg: ExperimentConfig) -> RunResult:
    scheme = _scheme(cfg)
    if scheme.capacity is not None:
        scheme.check_linear(cfg.n_basis)
    x = np.arange(cfg.points) / cfg.points
    values = basis_matrix(scheme, cfg.n_basis, x)
    rows, worst = [], 0.0
    for m in range(1, cfg.n_basis + 1):
        idx = linear_to_dyadic(scheme, m) if scheme.kind is not SchemeKind.POWER else None
        label, j, k = _index_label(idx)
        pole = scheme.pole(m)
        abs2 = np.abs(values[m - 1]) ** 2
        if isinstance(idx, DyadicIndex):
            ref = boundary_modulus_sq(scheme, idx, x)
            worst = max(worst, float(np.max(np.abs(abs2 - ref) / ref)))
        for n in range(cfg.points):
            v = values[m - 1, n]
            rows.append([m, label, j, k, pole.r, pole.h, x[n], v.real, v.imag, abs2[n]])
    gate = Gate("modulus_consistency", worst <= 1e-10,
                f"max relative gap between |B_m|^2 and its closed form: {worst:.3e}")
    return RunResult(["m", "index", "j", "k", "pole_r", "pole_h", "x", "re", "im", "abs2"],
                     rows, {"max_modulus_gap": worst}, [gate])


def gram_matrix(scheme: PoleScheme, count: int, grid: BoundaryGrid) -> np.ndarray:
    """``G[i, j] = <B_{i+1}, B_{j+1}>`` by the rectangle rule."""
    b = basis_matrix(scheme, count, grid.nodes)
    return b @ b.conj().T / grid.size


def run_gram(cfg: ExperimentConfig) -> RunResult:
    scheme = _scheme(cfg)
    if scheme.capacity is not None:
        scheme.check_linear(cfg.n_basis)
    g = gram_matrix(scheme, cfg.n_basis, BoundaryGrid(cfg.log2_size))
    dev = np.abs(g - np.eye(cfg.n_basis))
    rows = [[i + 1, j + 1, g[i, j].real, g[i, j].imag, dev[i, j]]
            for i in range(cfg.n_basis) for j in range(cfg.n_basis)]
    off = dev.copy()
    np.fill_diagonal(off, 0.0)
    summary = {"max_offdiag": float(off.max()), "max_deviation": float(dev.max())}
    gate = Gate("orthonormality", summary["max_deviation"] < cfg.gate_tol,
                f"max |G - I| = {summary['max_deviation']:.3e} (tolerance {cfg.gate_tol:g})")
    return RunResult(["row", "col", "re", "im", "abs_dev"], rows, summary, [gate])


def run_norms(cfg: ExperimentConfig) -> RunResult:
    scheme = _dyadic(cfg, "norms")
    grid = BoundaryGrid(cfg.log2_size)
    header = ["name", "family", "degree", "p", "lp_f", "lp_truncated", "hp_square", "np_value",
              "sf_value", "hp_ratio", "np_ratio", "sf_over_np", "tail_fraction", "converged",
              "parseval_rel_error", "bessel_excess"]
    rows, recs = [], []
    worst_parseval = worst_bessel = 0.0
    for spec in corpus_members(cfg):
        f = realize(spec, grid)
        tree = analyze(f, scheme)
        energy = tree.energy()
        synth = float(np.mean(np.abs(synthesize(tree, grid).values) ** 2))
        parseval = abs(synth - energy) / energy if energy else 0.0
        bessel = (energy - tree.reference_energy) / tree.reference_energy
        worst_parseval = max(worst_parseval, parseval)
        worst_bessel = max(worst_bessel, bessel)
        for r in norm_records(spec.name, f, scheme, cfg.ps, spec.degree):
            recs.append((spec, r))
            rows.append([spec.name, spec.family, "" if spec.degree is None else spec.degree, r.p,
                         r.lp_f, r.lp_truncated, r.hp_square, r.np_value, r.sf_value, r.hp_ratio,
                         r.np_ratio, r.sf_over_np, r.tail_fraction, int(r.converged),
                         parseval, bessel])
    per_p = {}
    for p in cfg.ps:
        sel = [(s, r) for s, r in recs if r.p == p]
        ratios = [r.hp_ratio for _, r in sel]
        poly = [(s.degree, r.hp_ratio) for s, r in sel
                if s.family in POLYNOMIAL_FAMILIES and s.degree and s.degree > 0]
        slope = degree_slope(*zip(*poly)) if len({d for d, _ in poly}) >= 2 else None
        per_p[repr(p)] = {
            "equivalence_constant": fit_equivalence_constant(ratios),
            "ratio_spread": max(ratios) / min(ratios),
            "polynomial_degree_slope": slope,
            "max_sf_over_np": max(r.sf_over_np for _, r in sel),
            "max_np_ratio": max(r.np_ratio for _, r in sel),
        }
    n_members = len({s.name for s, _ in recs})
    summary = {
        "members": n_members,
        "converged_members": len({s.name for s, r in recs if r.converged}),
        "max_parseval_rel_error": worst_parseval,
        "max_bessel_excess": worst_bessel,
        "per_p": per_p,
    }
    gates = [
        Gate("parseval", worst_parseval <= cfg.gate_tol,
             f"max relative Parseval error {worst_parseval:.3e}"),
        Gate("bessel", worst_bessel <= cfg.gate_tol,
             f"max relative Bessel excess {worst_bessel:.3e}"),
    ]
    return RunResult(header, rows, summary, gates)


def run_scramble(cfg: ExperimentConfig) -> RunResult:
    scheme = _dyadic(cfg, "scramble")
    grid = BoundaryGrid(cfg.log2_size)
    rows = []
    all_ratios = {p: [] for p in cfg.ps}
    truncation = {}
    for spec in corpus_members(cfg):
        f = realize(spec, grid)
        reports = scramble_experiment_multi(f, scheme, cfg.ps, cfg.trials, cfg.seed)
        for p in cfg.ps:
            rep = reports[p]
            trunc = rep.meta["truncation_ratio"]
            truncation.setdefault(repr(p), []).append(trunc)
            all_ratios[p].extend(rep.records.tolist())
            rows.extend([spec.name, p, t, r, r * trunc] for t, r in enumerate(rep.records))
    every = np.concatenate([np.asarray(v) for v in all_ratios.values()])
    per_p = {repr(p): {"min_ratio": min(v), "max_ratio": max(v), "mean_ratio": float(np.mean(v))}
             for p, v in all_ratios.items()}
    summary = {
        "min_ratio": float(every.min()),
        "max_ratio": float(every.max()),
        "spread": float(every.max() / every.min()),
        "per_p": per_p,
        "truncation_ratio_range": {k: [min(v), max(v)] for k, v in truncation.items()},
    }
    gates = []
    if 2.0 in all_ratios:
        dev = float(np.max(np.abs(np.asarray(all_ratios[2.0]) - 1.0)))
        summary["p2_max_deviation"] = dev
        gates.append(Gate("p2_neutrality", dev <= NEUTRALITY_TOL,
                          f"max |ratio - 1| at p = 2: {dev:.3e}"))
    return RunResult(["name", "p", "trial", "ratio", "ratio_vs_f"], rows, summary, gates)


def run_counterexample(cfg: ExperimentConfig) -> RunResult:
    degrees = list(cfg.degrees)
    if degrees != sorted(degrees) or len(set(degrees)) != len(degrees):
        raise ParameterError("degrees must be strictly ascending")
    rows, per_p = [], {}
    for p in cfg.ps:
        table = power_basis_counterexample(p, degrees, cfg.trials, cfg.seed, cfg.oversample)
        ratios = [r.ratio for r in table]
        rows.extend([r.p, r.n, r.grid_size, r.norm_f, r.mean_norm_t, r.stderr, r.ratio] for r in table)
        diffs = np.diff(ratios)
        per_p[repr(p)] = {
            "slope": loglog_slope(degrees, ratios) if len(degrees) > 1 else None,
            "strictly_decreasing": bool(np.all(diffs < 0)),
            "strictly_increasing": bool(np.all(diffs > 0)),
        }
    return RunResult(["p", "n", "grid_size", "norm_f", "mean_norm_t", "stderr", "ratio"],
                     rows, {"per_p": per_p}, [])


def run_lemma_bounds(cfg: ExperimentConfig) -> RunResult:
    scheme = _dyadic(cfg, "lemma-bounds")
    res = level_bound_scan(scheme, cfg.j_max, cfg.samples_per_cell)
    rows, lo, hi = [], math.inf, 0.0
    for b in res.levels:
        lo, hi = min(lo, b.c_level), max(hi, b.C_level)
        rows.append([b.j, b.c_level, b.C_level, lo, hi])
    summary = {"c_est": res.c_est, "C_est": res.C_est}
    gate = Gate("bounds_finite", res.c_est > 0 and math.isfinite(res.C_est),
                f"c_est = {res.c_est:.6g}, C_est = {res.C_est:.6g}")
    return RunResult(["j", "c_level", "C_level", "c_running", "C_running"], rows, summary, [gate])


def run_khintchine(cfg: ExperimentConfig) -> RunResult:
    rows, per_p, outside = [], {}, 0
    calib = calibration_alphas(cfg.seed, cfg.n_calibration, cfg.max_length)
    test = random_alphas(cfg.seed, cfg.n_alpha, cfg.max_length, stream=1)
    for p in cfg.ps:
        c_ratios = [khintchine_ratio(a, p).mean_ratio for a in calib]
        lo, hi = min(c_ratios), max(c_ratios)
        t_ratios = [khintchine_ratio(a, p).mean_ratio for a in test]
        # one ulp of slack for ratios that tie the band edge
        inside = [lo * (1 - 1e-12) <= r <= hi * (1 + 1e-12) for r in t_ratios]
        outside += inside.count(False)
        for i, (a, r) in enumerate(zip(calib, c_ratios)):
            rows.append([p, "calibration", i, a.size, r, lo, hi, 1])
        for i, (a, r, ok) in enumerate(zip(test, t_ratios, inside)):
            rows.append([p, "test", i, a.size, r, lo, hi, int(ok)])
        sharp = khintchine_sharp_bounds(p)
        per_p[repr(p)] = {"band": [lo, hi], "sharp_bounds": list(sharp),
                          "test_min": min(t_ratios), "test_max": max(t_ratios)}
    gate = Gate("band_stability", outside == 0, f"{outside} test ratios fall outside the fitted band")
    return RunResult(["p", "set", "alpha_id", "length", "ratio", "band_lo", "band_hi", "in_band"],
                     rows, {"per_p": per_p, "outside": outside}, [gate])


def run_nonsep(cfg: ExperimentConfig) -> RunResult:
    rows = []
    if cfg.kind is SchemeKind.POWER:
        sums = nonseparability_partial_sums(PoleScheme(cfg.kind, 1), cfg.levels)
        rows = [[m, m, float(s), 1.0, ""] for m, s in enumerate(sums, start=1)]
    else:
        scheme = PoleScheme(cfg.kind, cfg.levels)
        sums = nonseparability_partial_sums(scheme, scheme.capacity)
        m = scheme.n_heads
        prev = float(sums[m - 1])
        for j in range(1, cfg.levels + 1):
            m += scheme.level_size(j)
            s = float(sums[m - 1])
            rows.append([j, m, s, s - prev, scheme.level_size(j) * level_gap(j)])
            prev = s
    partial = [r[2] for r in rows]
    increasing = all(b > a for a, b in zip(partial, partial[1:]))
    summary = {"final": partial[-1], "min_increment": min(r[3] for r in rows),
               "max_increment": max(r[3] for r in rows), "increasing": increasing}
    gate = Gate("increasing", increasing, "partial sums strictly increase")
    return RunResult(["level", "m", "partial_sum", "increment", "level_closed_form"],
                     rows, summary, [gate])


RUNNERS: dict[str, Callable[[ExperimentConfig], RunResult]] = {
    "basis-eval": run_basis_eval,
    "gram": run_gram,
    "norms": run_norms,
    "scramble": run_scramble,
    "counterexample": run_counterexample,
    "lemma-bounds": run_lemma_bounds,
    "khintchine": run_khintchine,
    "nonsep": run_nonsep,
}
