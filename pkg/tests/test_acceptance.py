"""Acceptance criteria, one test (or parametrized group) per criterion.

Each criterion prints a single ``criterion N PASS|FAIL`` line; the lines
are collected again in the terminal summary.  Run on its own with

    pytest tests/test_acceptance.py -v

Criteria 3, 4 and 9 share one set of CLI runs (under 1, 4 and 8 threads)
which is made once per session.
"""

import csv
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from tmbasis.boundary import BoundaryGrid, fefferman_stein_fit
from tmbasis.config import ExperimentConfig
from tmbasis.core import PoleScheme, SchemeKind
from tmbasis.experiments import gram_matrix, run_khintchine, run_norms, run_nonsep
from tmbasis.unconditional import khintchine_ratio, level_bound_scan

SEED = 20240611
THREADS = (1, 4, 8)
SCHEMES = ("case1", "case2")
PS = [1.33, 2.0, 3.0, 4.0]

_parts: dict[int, dict[str, tuple[bool, str, float]]] = {}


def report(n, part, passed, detail, title, elapsed, budget, total_parts=1):
    _parts.setdefault(n, {})[part] = (passed, detail, elapsed)
    parts = _parts[n]
    ok = all(p for p, _, _ in parts.values())
    total = sum(e for _, _, e in parts.values())
    text = "; ".join(f"{k}: {d}" if k else d for k, (_, d, _) in parts.items())
    done = "" if len(parts) == total_parts else f" ({len(parts)}/{total_parts} parts so far)"
    line = (f"criterion {n} {'PASS' if ok else 'FAIL'}  {title}{done}: {text} "
            f"[{total:.1f}s, budget {budget}s]")
    ACCEPTANCE_LINES[n] = line
    print(line)


def _cli(sub, cfg_doc, workdir, threads):
    workdir.mkdir(parents=True, exist_ok=True)
    cfg = workdir / f"{sub}.config.json"
    # relative output path, so manifests from different runs can be compared byte for byte
    cfg.write_text(json.dumps({**cfg_doc, "output": "out"}))
    env = dict(os.environ, TMBASIS_THREADS=str(threads))
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "tmbasis", sub, cfg.name], env=env, cwd=workdir,
                          capture_output=True, text=True)
    return proc, time.perf_counter() - t0


@pytest.fixture(scope="session")
def cli_runs(tmp_path_factory):
    """CSV bytes, manifests and wall times for the criterion 3 and 4 runs."""
    root = tmp_path_factory.mktemp("acceptance")
    runs = {}
    jobs = [(f"scramble-{s}", "scramble", {"scheme": s, "j_max": 8, "log2_size": 14, "ps": PS,
                                           "trials": 200, "seed": SEED}) for s in SCHEMES]
    jobs.append(("counterexample", "counterexample",
                 {"scheme": "power", "ps": [4.0, 1.33], "trials": 256, "seed": SEED,
                  "degrees": [16, 32, 64, 128, 256, 512, 1024]}))
    for threads in THREADS:
        for key, sub, doc in jobs:
            work = root / f"t{threads}" / key
            proc, elapsed = _cli(sub, doc, work, threads)
            out = work / "out"
            done = proc.returncode == 0
            runs[(key, threads)] = {
                "code": proc.returncode,
                "stderr": proc.stderr,
                "csv": (out / f"{sub}.csv").read_bytes() if done else b"",
                "manifest_bytes": (out / f"{sub}.manifest.json").read_bytes() if done else b"",
                "elapsed": elapsed,
            }
            runs[(key, threads)]["manifest"] = json.loads(runs[(key, threads)]["manifest_bytes"] or "{}")
    return runs


def _rows(blob):
    return list(csv.DictReader(blob.decode().splitlines()))


def test_criterion_1_orthonormality():
    t0 = time.perf_counter()
    grid = BoundaryGrid(16)
    devs = {}
    for kind in SchemeKind:
        g = gram_matrix(PoleScheme(kind, 6), 64, grid)
        devs[kind.value] = float(np.max(np.abs(g - np.eye(64))))
    ok = all(d < 1e-6 for d in devs.values())
    elapsed = time.perf_counter() - t0
    detail = ", ".join(f"{k} max|G-I|={v:.1e}" for k, v in devs.items())
    report(1, "", ok and elapsed < 30, detail, "Gram matrix of 64 functions on 2^16 nodes", elapsed, 30)
    assert ok


def test_criterion_2_parseval_bessel():
    t0 = time.perf_counter()
    worst = {}
    for s in SCHEMES:
        cfg = ExperimentConfig(scheme=s, j_max=8, log2_size=14, ps=(2.0,))
        summ = run_norms(cfg).summary
        worst[s] = (summ["max_parseval_rel_error"], summ["max_bessel_excess"], summ["members"])
    ok = all(p <= 1e-8 and b <= 1e-8 and m == 20 for p, b, m in worst.values())
    elapsed = time.perf_counter() - t0
    detail = ", ".join(f"{s} parseval {p:.1e} bessel excess {b:.1e}" for s, (p, b, _) in worst.items())
    report(2, "", ok and elapsed < 60, detail, "Parseval and Bessel over the corpus", elapsed, 60)
    assert ok


@pytest.mark.parametrize("scheme", SCHEMES)
def test_criterion_3_scramble_bounds(cli_runs, scheme):
    run = cli_runs[(f"scramble-{scheme}", 1)]
    assert run["code"] == 0, run["stderr"]
    rows = _rows(run["csv"])
    ratios = np.array([float(r["ratio"]) for r in rows])
    p2 = np.array([float(r["ratio"]) for r in rows if float(r["p"]) == 2.0])
    n_members = len({r["name"] for r in rows})
    in_range = bool(np.all((ratios >= 0.04) & (ratios <= 25)))
    spread = float(ratios.max() / ratios.min())
    p2_dev = float(np.max(np.abs(p2 - 1)))
    ok = (in_range and spread < 100 and p2_dev <= 1e-6 and n_members == 20
          and len(ratios) == 20 * 200 * len(PS))
    detail = (f"ratios in [{ratios.min():.3f}, {ratios.max():.3f}], spread {spread:.2f}, "
              f"p=2 max dev {p2_dev:.1e}")
    report(3, f"{scheme} scramble", ok, detail, "sign-scrambled TM expansions",
           run["elapsed"], 600, total_parts=4)
    assert ok


@pytest.mark.parametrize("scheme", SCHEMES)
def test_criterion_3_degree_slope(scheme):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(scheme=scheme, j_max=8, log2_size=14, ps=tuple(PS))
    per_p = run_norms(cfg).summary["per_p"]
    slopes = {p: per_p[repr(p)]["polynomial_degree_slope"] for p in PS}
    ok = all(abs(s) <= 0.1 for s in slopes.values())
    detail = "slopes " + ", ".join(f"p={p}: {s:+.3f}" for p, s in slopes.items())
    report(3, f"{scheme} equivalence", ok, detail, "sign-scrambled TM expansions",
           time.perf_counter() - t0, 600, total_parts=4)
    assert ok, detail


def test_criterion_4_power_basis(cli_runs):
    run = cli_runs[("counterexample", 1)]
    assert run["code"] == 0, run["stderr"]
    per_p = run["manifest"]["summary"]["per_p"]
    s4, s133 = per_p["4.0"]["slope"], per_p["1.33"]["slope"]
    ok = abs(s4 + 0.25) <= 0.05 and abs(s133 - 0.25) <= 0.07
    detail = f"slope p=4 {s4:+.3f} (target -0.25 +- 0.05), p=1.33 {s133:+.3f} (target +0.25 +- 0.07)"
    report(4, "", ok and run["elapsed"] < 300, detail, "power-basis counterexample",
           run["elapsed"], 300)
    assert ok


def test_criterion_5_lemma_bounds():
    t0 = time.perf_counter()
    res = level_bound_scan(PoleScheme(SchemeKind.CASE1, 12), 12, samples_per_cell=64)
    res2 = level_bound_scan(PoleScheme(SchemeKind.CASE2, 12), 12, samples_per_cell=64)
    ok = 0.02 <= res.c_est <= 0.09 and 3.0 <= res.C_est <= 6.0
    elapsed = time.perf_counter() - t0
    detail = (f"case1 c_est={res.c_est:.5f} C_est={res.C_est:.4f} "
              f"(case2 reported: c_est={res2.c_est:.5f} C_est={res2.C_est:.4f})")
    report(5, "", ok and elapsed < 60, detail, "pointwise and level-sum bounds", elapsed, 60)
    assert ok


def test_criterion_6_khintchine():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(ps=(1.33, 3.0, 4.0), n_alpha=100, max_length=12, n_calibration=200,
                           seed=SEED)
    res = run_khintchine(cfg)
    single = [khintchine_ratio([c], p).mean_ratio for c in (1.0, -3.25, 0.3 + 0.4j) for p in cfg.ps]
    ok = res.summary["outside"] == 0 and all(r == 1.0 for r in single)
    elapsed = time.perf_counter() - t0
    bands = ", ".join(f"p={p}: [{v['band'][0]:.4f}, {v['band'][1]:.4f}]"
                      for p, v in res.summary["per_p"].items())
    exact = all(r == 1.0 for r in single)
    detail = f"{res.summary['outside']} of 300 outside; bands {bands}; single term exactly 1: {exact}"
    report(6, "", ok and elapsed < 120, detail, "Khintchine sandwich", elapsed, 120)
    assert ok


def test_criterion_7_fefferman_stein():
    t0 = time.perf_counter()
    pqs = [(1.5, 2.0), (2.0, 2.0), (3.0, 2.0)]
    c8 = fefferman_stein_fit(pqs, 8, 20, seed=SEED, log2_size=9)
    c16 = fefferman_stein_fit(pqs, 16, 20, seed=SEED + 1, log2_size=9)
    factors = [b.constant / a.constant for a, b in zip(c8, c16)]
    ok = all(1 / 1.5 <= f <= 1.5 for f in factors)
    elapsed = time.perf_counter() - t0
    detail = ", ".join(f"(p,q)=({a.p},{a.q}) C8={a.constant:.3f} C16={b.constant:.3f}"
                       for a, b in zip(c8, c16))
    report(7, "", ok and elapsed < 120, detail, "Fefferman-Stein constant stability", elapsed, 120)
    assert ok


def test_criterion_8_nonseparability():
    t0 = time.perf_counter()
    res = run_nonsep(ExperimentConfig(scheme="case1", levels=16))
    incs = [r[3] for r in res.rows]
    final = res.summary["final"]
    ok = 8 <= final <= 10.4 and all(0.5 < i <= 0.586 for i in incs)
    elapsed = time.perf_counter() - t0
    detail = f"J=16 sum {final:.4f}, increments in [{min(incs):.6f}, {max(incs):.6f}]"
    report(8, "", ok and elapsed < 1, detail, "non-separability partial sums", elapsed, 1)
    assert ok


def test_criterion_9_determinism(cli_runs):
    keys = sorted({k for k, _ in cli_runs})
    same = {}
    for key in keys:
        blobs = [cli_runs[(key, t)]["csv"] for t in THREADS]
        mans = [cli_runs[(key, t)]["manifest_bytes"] for t in THREADS]
        same[key] = all(b == blobs[0] and b for b in blobs) and all(m == mans[0] for m in mans)
    ok = all(same.values())
    total = sum(r["elapsed"] for r in cli_runs.values())
    detail = ", ".join(f"{k} {'identical' if v else 'DIFFERENT'}" for k, v in same.items())
    report(9, "", ok, detail + f" across threads {THREADS}", "byte-identical CSVs", total, 1800)
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
