"""Command line entry point.

Every subcommand takes one JSON config file and writes ``<name>.csv`` and
``<name>.manifest.json`` into the config's output directory.  A run
manifest is itself a valid config argument, and ``replay`` re-executes it.

Exit codes: 0 success, 2 config error, 3 resolution error, 4 numerical
gate failure, 5 unknown subcommand.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import MANIFEST_FORMAT, ExperimentConfig
from .errors import IndexOutOfRangeError, ParameterError, ResolutionError
from .experiments import RUNNERS, RunResult

EXIT_CONFIG = 2
EXIT_RESOLUTION = 3
EXIT_GATE = 4
EXIT_UNKNOWN = 5


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_table(path: Path, result: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.header)
        for row in result.rows:
            w.writerow([_cell(v) for v in row])


def run_manifest(name: str, cfg: ExperimentConfig, result: RunResult) -> dict:
    return {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "subcommand": name,
        "library_version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "table": f"{name}.csv",
        "summary": result.summary,
        "gates": [g.to_dict() for g in result.gates],
    }


def execute(name: str, cfg: ExperimentConfig) -> tuple[RunResult, Path]:
    """Run one subcommand and write its artifacts; returns the result and output directory."""
    cfg = cfg.resolved()
    result = RUNNERS[name](cfg)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / f"{name}.csv", result)
    text = json.dumps(run_manifest(name, cfg, result), indent=2, allow_nan=False) + "\n"
    (out / f"{name}.manifest.json").write_text(text)
    return result, out


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(name: str, config_path: str) -> None:
    try:
        cfg = ExperimentConfig.load(config_path)
        result, out = execute(name, cfg)
    except ResolutionError as exc:
        _fail(EXIT_RESOLUTION, f"{exc} (raise log2_size or lower j_max)")
    except (ParameterError, IndexOutOfRangeError, ValueError, TypeError) as exc:
        _fail(EXIT_CONFIG, f"{exc} (fix the config file {config_path})")
    failed = [g for g in result.gates if not g.passed]
    if failed:
        _fail(EXIT_GATE, "; ".join(f"gate {g.name} failed: {g.detail}" for g in failed)
              + f" (artifacts kept in {out})")
    click.echo(f"{name}: wrote {out / (name + '.csv')}")


class _Group(click.Group):
    def resolve_command(self, ctx, args):
        name = args[0] if args else ""
        if name and not name.startswith("-") and self.get_command(ctx, name) is None:
            choices = ", ".join(self.list_commands(ctx))
            _fail(EXIT_UNKNOWN, f"unknown subcommand {name!r}; choose one of {choices}")
        return super().resolve_command(ctx, args)


@click.group(cls=_Group, invoke_without_command=True, context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--self-check", is_flag=True, help="Run the fast invariant suite and exit.")
@click.version_option(__version__, prog_name="tmbasis")
@click.pass_context
def main(ctx: click.Context, self_check: bool) -> None:
    """TM rational bases: norms, sign-flip experiments and bound scans."""
    if self_check:
        from .selfcheck import run_self_check
        ok = run_self_check(click.echo)
        sys.exit(0 if ok else EXIT_GATE)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())
        sys.exit(EXIT_CONFIG)


def _make_command(name: str, doc: str) -> None:
    @main.command(name=name, help=doc)
    @click.argument("config", type=click.Path(dir_okay=False))
    def command(config: str) -> None:
        _guarded(name, config)


_HELP = {
    "basis-eval": "Evaluate the first n_basis basis functions at `points` boundary nodes.",
    "gram": "Gram matrix of the first n_basis basis functions on the config grid.",
    "norms": "Boundary, dyadic square-function and TM square-function norms over the corpus.",
    "scramble": "Sign-scrambled TM expansions of every corpus member.",
    "counterexample": "Random-sign Dirichlet sums in the power basis.",
    "lemma-bounds": "Pointwise lower and level-sum upper bounds of |B_jk|^2.",
    "khintchine": "Exhaustive Khintchine ratios against a once-fitted band.",
    "nonsep": "Partial sums of 1 - |a_m| over complete dyadic levels.",
}
for _name in RUNNERS:
    _make_command(_name, _HELP[_name])


@main.command()
@click.argument("manifest", type=click.Path(dir_okay=False))
def replay(manifest: str) -> None:
    """Re-execute a run from its manifest."""
    try:
        doc = json.loads(Path(manifest).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        _fail(EXIT_CONFIG, f"cannot read manifest {manifest}: {exc}")
    if doc.get("format") != MANIFEST_FORMAT or doc.get("subcommand") not in RUNNERS:
        _fail(EXIT_CONFIG, f"{manifest} is not a run manifest")
    _guarded(doc["subcommand"], manifest)
