"""Command-line interface: generate series, analyze them, replicate, benchmark.

Parameter precedence: explicit flags beat a ``--config`` JSON file, which
beats the ``SOMQE_SEED`` environment variable (seed only), which beats the
built-in defaults. Every run writes a ``run_manifest.json`` into its output
directory recording the command and all resolved parameters, so any run can
be reproduced from its manifest alone.

Exit codes: 0 success, 2 configuration/input/format problems, 3 I/O failures.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
from click.core import ParameterSource

from . import __version__, backend
from .analysis import TrainingMode, emit_report, run_series
from .errors import ConfigError, InputError, SomQeError
from .features import strategy_from_name
from .imaging import (
    DEFAULT_BASELINE,
    DEFAULT_HEIGHT,
    DEFAULT_WIDTH,
    SeriesKind,
    SeriesSpec,
    generate_series,
    load_image,
    read_series_manifest,
    save_image,
    write_series_manifest,
)
from .som import SomConfig

RUN_MANIFEST_SCHEMA_VERSION = 1

# replication quality line is printed against this goodness-of-fit floor
R2_TARGET = 0.95
# benchmark budget: a 20-image default-size run should finish within a minute
BENCH_BUDGET_MS = 60_000.0

_KINDS = [k.value for k in SeriesKind]
_MODES = [m.value for m in TrainingMode]
_STRATEGIES = ["pixel-position", "pixel", "patch"]

# every option name a --config file may set, across all subcommands
_CONFIG_KEYS = {
    "kind", "width", "height", "deltas", "baseline", "cells", "seed",
    "rows", "cols", "radius", "alpha", "iters", "strategy", "patch",
    "mode", "out", "format", "count", "backend",
}

# click parameter names that differ from their option (and config-file) names
_CONFIG_ALIASES = {"image_format": "format", "report_formats": "format",
                   "backend_name": "backend"}


def _cli_errors(fn):
    """Map library errors to the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SomQeError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _load_config(path):
    if path is None:
        return {}, None
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{p}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: config file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: config file must hold a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{p}: unknown config keys: {', '.join(sorted(unknown))}")
    return data, p


def _resolve_params(ctx, config: dict) -> dict:
    """Apply the precedence: flag > config file > SOMQE_SEED > click default."""
    resolved = {}
    for param in ctx.command.params:
        name = param.name
        if name == "config" or isinstance(param, click.Argument):
            continue
        value = ctx.params[name]
        key = _CONFIG_ALIASES.get(name, name)
        if ctx.get_parameter_source(name) is not ParameterSource.COMMANDLINE:
            if key in config:
                raw = config[key]
                if name == "deltas" and isinstance(raw, (list, tuple)):
                    raw = ",".join(repr(float(d)) for d in raw)
                try:
                    value = param.type.convert(raw, param, ctx)
                except click.UsageError as exc:
                    raise ConfigError(
                        f"config value for {name!r} is invalid: {exc.format_message()}"
                    ) from None
            elif name == "seed":
                env = os.environ.get("SOMQE_SEED")
                if env is not None:
                    try:
                        value = int(env)
                    except ValueError:
                        raise ConfigError(
                            f"SOMQE_SEED must be an integer, got {env!r}"
                        ) from None
        resolved[name] = value
    return resolved


def _parse_deltas(text):
    if text is None:
        return None
    tokens = [tok.strip() for tok in text.split(",")]
    if any(tok == "" for tok in tokens):
        raise ConfigError(f"--deltas must be comma-separated numbers, got {text!r}")
    try:
        return tuple(float(tok) for tok in tokens)
    except ValueError:
        raise ConfigError(f"--deltas must be comma-separated numbers, got {text!r}") from None


def _write_run_manifest(out_dir: Path, command: str, config_path, params: dict,
                        deterministic: bool = False):
    # deterministic runs (replicate) null the timestamp so every output byte,
    # manifest included, is stable across re-runs with the same seed
    manifest = {
        "schema_version": RUN_MANIFEST_SCHEMA_VERSION,
        "command": command,
        "config_path": str(config_path) if config_path is not None else None,
        "parameters": params,
        "seed": params.get("seed"),
        "out_dir": str(out_dir),
        "timestamp": None if deterministic
        else datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def _save_series(out_dir: Path, spec: SeriesSpec, images, image_format: str):
    """Write the images plus their series.json; returns the filenames."""
    out_dir.mkdir(parents=True, exist_ok=True)
    filenames = [f"{spec.kind.value}-{i:02d}.{image_format}" for i in range(len(images))]
    for name, image in zip(filenames, images):
        save_image(image, out_dir / name)
    write_series_manifest(out_dir / "series.json", spec, filenames, images)
    return filenames


@click.group()
@click.version_option(__version__, prog_name="somqe")
def main():
    """Change detection in image series via self-organizing-map quantization error.

    Train a small map on a reference image, score later images by their
    quantization error, and fit the error against the known change percentage.
    """


# --- generate -----------------------------------------------------------------


@main.command("generate")
@click.option("--kind", type=click.Choice(_KINDS), default=None,
              help="Series kind to generate (required here or in --config).")
@click.option("--width", type=int, default=DEFAULT_WIDTH, show_default=True,
              help="Image width in pixels.")
@click.option("--height", type=int, default=DEFAULT_HEIGHT, show_default=True,
              help="Image height in pixels.")
@click.option("--deltas", type=str, default=None,
              help="Comma-separated change percentages, one per image "
                   "(default: the kind's built-in series).")
@click.option("--baseline", type=float, default=DEFAULT_BASELINE, show_default=True,
              help="Reference foreground density in percent (random kinds).")
@click.option("--cells", type=int, default=None,
              help="Cell grid subdivision (checker kinds; default 5 for "
                   "checker-count, 3 for checker-size).")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for foreground placement.")
@click.option("--format", "image_format", type=click.Choice(["pgm", "png"]),
              default="pgm", show_default=True, help="Image file format.")
@click.option("--out", type=click.Path(), default=None,
              help="Output directory [default: series-<kind>].")
@click.option("--config", type=click.Path(), default=None,
              help="JSON config file; flags given explicitly win over it.")
@click.pass_context
@_cli_errors
def cmd_generate(ctx, **_params):
    """Generate one synthetic image series and its series.json manifest."""
    config, config_path = _load_config(ctx.params["config"])
    p = _resolve_params(ctx, config)
    if p["kind"] is None:
        raise ConfigError("--kind is required (on the command line or in --config)")
    spec = SeriesSpec(
        kind=SeriesKind(p["kind"]), width=p["width"], height=p["height"],
        deltas=_parse_deltas(p["deltas"]), baseline_density=p["baseline"],
        cells=p["cells"], seed=p["seed"],
    )
    out_dir = Path(p["out"]) if p["out"] is not None else Path(f"series-{spec.kind.value}")
    images = generate_series(spec)
    _save_series(out_dir, spec, images, p["image_format"])
    _write_run_manifest(out_dir, "generate", config_path, {
        "kind": spec.kind.value, "width": spec.width, "height": spec.height,
        "deltas": list(spec.deltas),
        "baseline": spec.baseline_density if spec.kind.is_random else None,
        "cells": spec.cells, "seed": spec.seed,
        "format": p["image_format"], "out": str(out_dir),
    })
    click.echo(f"wrote {len(images)} {p['image_format']} images and series.json to {out_dir}")


# --- analyze ------------------------------------------------------------------


def _som_options(fn):
    fn = click.option("--rows", type=int, default=4, show_default=True,
                      help="Map rows.")(fn)
    fn = click.option("--cols", type=int, default=4, show_default=True,
                      help="Map columns.")(fn)
    fn = click.option("--radius", type=float, default=1.2, show_default=True,
                      help="Initial neighborhood radius.")(fn)
    fn = click.option("--alpha", type=float, default=0.2, show_default=True,
                      help="Initial learning rate.")(fn)
    fn = click.option("--iters", type=int, default=10000, show_default=True,
                      help="Training iterations.")(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True,
                      help="Map seed (weights and sample order).")(fn)
    fn = click.option("--strategy", type=click.Choice(_STRATEGIES), default="pixel-position",
                      show_default=True, help="Feature extraction strategy.")(fn)
    fn = click.option("--patch", type=int, default=4, show_default=True,
                      help="Patch side for --strategy patch.")(fn)
    return fn


def _analyze_series(manifest_path: Path, som: SomConfig, strategy, mode: TrainingMode):
    manifest = read_series_manifest(manifest_path)
    base_dir = manifest_path.parent
    images = []
    deltas = []
    for record in manifest["images"]:
        images.append(load_image(base_dir / record["filename"]))
        deltas.append(float(record["delta_pct"]))
    return run_series(images, deltas, som, strategy, mode, series_id=manifest["kind"])


@main.command("analyze")
@click.argument("series", type=click.Path())
@_som_options
@click.option("--mode", type=click.Choice(_MODES), default=TrainingMode.REFERENCE_TRAINED.value,
              show_default=True, help="Training mode.")
@click.option("--format", "report_formats", type=str, default="csv,json,svg",
              show_default=True, help="Comma-separated report formats.")
@click.option("--out", type=click.Path(), default="analysis", show_default=True,
              help="Report output directory.")
@click.option("--config", type=click.Path(), default=None,
              help="JSON config file; flags given explicitly win over it.")
@click.pass_context
@_cli_errors
def cmd_analyze(ctx, series, **_params):
    """Score a generated series (directory or series.json path) and fit QE."""
    config, config_path = _load_config(ctx.params["config"])
    p = _resolve_params(ctx, config)
    series_path = Path(series)
    manifest_path = series_path / "series.json" if series_path.is_dir() else series_path
    if not manifest_path.exists():
        raise InputError(f"{manifest_path}: series manifest not found")

    strategy = strategy_from_name(p["strategy"], p["patch"])
    som = SomConfig(dim=strategy.dim, rows=p["rows"], cols=p["cols"],
                    initial_radius=p["radius"], initial_learning_rate=p["alpha"],
                    iterations=p["iters"], seed=p["seed"])
    mode = TrainingMode(p["mode"])
    result = _analyze_series(manifest_path, som, strategy, mode)

    formats = tuple(tok.strip() for tok in p["report_formats"].split(","))
    out_dir = Path(p["out"])
    written = emit_report(result, out_dir / f"{result.series_id}-{mode.value}", formats=formats)
    _write_run_manifest(out_dir, "analyze", config_path, {
        "series": str(series_path), "rows": som.rows, "cols": som.cols,
        "radius": som.initial_radius, "alpha": som.initial_learning_rate,
        "iters": som.iterations, "seed": som.seed,
        "strategy": strategy.name, "patch": p["patch"], "mode": mode.value,
        "format": ",".join(formats), "out": str(out_dir),
    })
    fit = result.fit
    click.echo(f"{result.series_id}: r^2 = {fit.r2:.4f}, slope = {fit.slope:.6g}, "
               f"intercept = {fit.intercept:.6g} ({mode.value}, {strategy.name}, "
               f"{result.total_ms:.0f} ms)")
    for path in written:
        click.echo(f"wrote {path}")


# --- replicate ----------------------------------------------------------------


@main.command("replicate")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for both image generation and map training.")
@click.option("--format", "image_format", type=click.Choice(["pgm", "png"]),
              default="pgm", show_default=True, help="Image file format.")
@click.option("--out", type=click.Path(), default="replication", show_default=True,
              help="Output directory.")
@click.option("--config", type=click.Path(), default=None,
              help="JSON config file; flags given explicitly win over it.")
@click.pass_context
@_cli_errors
def cmd_replicate(ctx, **_params):
    """Generate, analyze, and report all five default series.

    Reference-trained mode, position-intensity pixel features, default map
    hyperparameters. Report timing fields are blanked so re-runs with the
    same seed produce byte-identical outputs; wall times go to the console.
    """
    config, config_path = _load_config(ctx.params["config"])
    p = _resolve_params(ctx, config)
    out_dir = Path(p["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    strategy = strategy_from_name("pixel-position")
    som = SomConfig(dim=strategy.dim, seed=p["seed"])

    rows = []
    for kind in SeriesKind:
        spec = SeriesSpec(kind=kind, seed=p["seed"])
        images = generate_series(spec)
        _save_series(out_dir / kind.value, spec, images, p["image_format"])
        result = run_series(images, spec.deltas, som, strategy,
                            TrainingMode.REFERENCE_TRAINED, series_id=kind.value)
        emit_report(result, out_dir / "reports" / kind.value, include_timing=False)
        rows.append(result)
        click.echo(f"{kind.value}: r^2 = {result.fit.r2:.4f}, slope = {result.fit.slope:.6g} "
                   f"({len(result.records)} images, {result.total_ms:.0f} ms)")

    header = "series_id,n_images,slope,intercept,r2"
    lines = [header]
    for result in rows:
        fit = result.fit
        lines.append(f"{result.series_id},{len(result.records)},{fit.slope!r},"
                     f"{fit.intercept!r},{fit.r2!r}")
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n")
    summary = {
        "schema_version": 1,
        "mode": TrainingMode.REFERENCE_TRAINED.value,
        "strategy": strategy.name,
        "seed": p["seed"],
        "series": [
            {
                "series_id": r.series_id, "n_images": len(r.records),
                "slope": r.fit.slope, "intercept": r.fit.intercept, "r2": r.fit.r2,
            }
            for r in rows
        ],
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_run_manifest(out_dir, "replicate", config_path, {
        "seed": p["seed"], "format": p["image_format"], "out": str(out_dir),
    }, deterministic=True)

    worst = min(r.fit.r2 for r in rows)
    verdict = "yes" if worst >= R2_TARGET else "NO"
    click.echo(f"all five series at r^2 >= {R2_TARGET}: {verdict} (worst {worst:.4f})")
    click.echo(f"summary and reports written to {out_dir}")


# --- bench --------------------------------------------------------------------


def _bench_deltas(count: int):
    """Non-decreasing central-square deltas from 1% to 32% of image area."""
    if count == 1:
        return (1.0,)
    return tuple(1.0 + (32.0 - 1.0) * i / (count - 1) for i in range(count))


@main.command("bench")
@click.option("--count", type=int, default=20, show_default=True,
              help="Number of images in the timed series.")
@click.option("--width", type=int, default=DEFAULT_WIDTH, show_default=True,
              help="Image width in pixels.")
@click.option("--height", type=int, default=DEFAULT_HEIGHT, show_default=True,
              help="Image height in pixels.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for generation and training.")
@click.option("--backend", "backend_name", type=click.Choice(["auto", "python", "cython", "both"]),
              default="auto", show_default=True, help="Kernel backend to time.")
@click.option("--out", type=click.Path(), default="bench", show_default=True,
              help="Output directory for bench.json.")
@click.option("--config", type=click.Path(), default=None,
              help="JSON config file; flags given explicitly win over it.")
@click.pass_context
@_cli_errors
def cmd_bench(ctx, **_params):
    """Time a reference-trained run over a generated series.

    --backend both times the compiled and the pure-Python kernels on the same
    work and checks that their quantization errors agree bit for bit.
    """
    config, config_path = _load_config(ctx.params["config"])
    p = _resolve_params(ctx, config)
    if p["count"] < 1:
        raise ConfigError("--count must be at least 1")
    spec = SeriesSpec(kind=SeriesKind.CENTRAL_SQUARE, width=p["width"], height=p["height"],
                      deltas=_bench_deltas(p["count"]), seed=p["seed"])
    images = generate_series(spec)
    strategy = strategy_from_name("pixel-position")
    som = SomConfig(dim=strategy.dim, seed=p["seed"])

    choice = p["backend_name"]
    if choice == "auto":
        names = [backend.backend_name()]
    elif choice == "both":
        names = ["cython", "python"]
    else:
        names = [choice]

    results = {}
    for name in names:
        backend.set_backend(name)
        result = run_series(images, spec.deltas, som, strategy,
                            TrainingMode.REFERENCE_TRAINED, series_id="bench")
        results[name] = result
        click.echo(f"[{name}] image wall times (ms): "
                   + " ".join(f"{r.ms:.0f}" for r in result.records))
        budget = "PASS" if result.total_ms < BENCH_BUDGET_MS else "FAIL"
        click.echo(f"[{name}] total {result.total_ms:.0f} ms for {len(images)} images "
                   f"at {spec.width}x{spec.height}: {budget} (budget {BENCH_BUDGET_MS:.0f} ms)")

    identical = None
    if len(results) == 2:
        qe_pairs = zip(results["cython"].qes, results["python"].qes)
        identical = all(a == b for a, b in qe_pairs)
        speedup = results["python"].total_ms / results["cython"].total_ms
        click.echo(f"bit-identical quantization errors across backends: "
                   f"{'yes' if identical else 'NO'}")
        click.echo(f"compiled speedup over pure python: {speedup:.1f}x")

    out_dir = Path(p["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema_version": 1,
        "count": p["count"], "width": spec.width, "height": spec.height,
        "seed": p["seed"],
        "backends": {
            name: {
                "total_ms": r.total_ms,
                "per_image_ms": [rec.ms for rec in r.records],
                "qe": r.qes,
            }
            for name, r in results.items()
        },
        "identical_across_backends": identical,
    }
    (out_dir / "bench.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _write_run_manifest(out_dir, "bench", config_path, {
        "count": p["count"], "width": spec.width, "height": spec.height,
        "seed": p["seed"], "backend": choice, "out": str(out_dir),
    })
    click.echo(f"wrote {out_dir / 'bench.json'}")


if __name__ == "__main__":
    main()
