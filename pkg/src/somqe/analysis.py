"""Series orchestration: train, score, fit QE against change, emit reports.

A run takes an image series plus the per-image change percentages, produces
one quantization error per image, and fits QE = slope * delta + intercept by
ordinary least squares. Reports come out as CSV (one row per image), JSON
(full config echo plus fit, versioned schema), and an SVG scatter plot with
the fitted line.

Timing: wall-clock per image. Under reference training the first record
carries extraction + training + scoring of the reference; later records carry
extraction + scoring only. Per-image training times each full train in its
record. Timing fields can be left out of serialized reports so that repeated
runs produce identical bytes.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .errors import FormatError, InputError
from .features import extract_vectors
from .som import SomConfig, init_grid, quantization_error, train

REPORT_SCHEMA_VERSION = 1


class TrainingMode(str, Enum):
    """How maps relate to images: one map trained on the first (reference)
    image and frozen for scoring, or a fresh map trained per image."""

    REFERENCE_TRAINED = "reference"
    PER_IMAGE = "per-image"


@dataclass(frozen=True)
class RegressionFit:
    """Least-squares line through (delta, QE) points.

    ``degenerate`` marks fits with no spread in x or y; those report slope
    from convention (0), intercept = mean y, r2 = 0, and never raise.
    """

    slope: float
    intercept: float
    r2: float
    n: int
    degenerate: bool


@dataclass(frozen=True)
class ImageRecord:
    """One scored image: position in the series, change percent, QE, and
    wall time (None once timing is stripped for byte-stable reports)."""

    index: int
    delta_pct: float
    qe: float
    ms: float | None

    def __post_init__(self):
        if self.qe < 0:
            raise InputError("quantization error cannot be negative")


@dataclass(frozen=True, eq=False)
class SeriesResult:
    """Everything one run produced: config echo, per-image records, fit."""

    series_id: str
    mode: TrainingMode
    strategy_name: str
    som_config: SomConfig
    width: int
    height: int
    records: tuple
    fit: RegressionFit
    total_ms: float | None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if len(self.records) == 0:
            raise InputError("a series result needs at least one image record")

    @property
    def qes(self) -> list:
        return [r.qe for r in self.records]

    @property
    def deltas(self) -> list:
        return [r.delta_pct for r in self.records]


def linear_fit(points) -> RegressionFit:
    """Ordinary least squares with intercept over (x, y) pairs.

    r2 = 1 - SS_res / SS_tot, clamped to [0, 1] against rounding. All x equal
    or all y equal leaves the line underdetermined or SS_tot zero; that is the
    degenerate case, not an error.
    """
    pts = [(float(x), float(y)) for x, y in points]
    n = len(pts)
    if n < 2:
        raise InputError("a line fit needs at least two points")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x_mean = sum(xs) / n
    y_mean = sum(ys) / n

    if all(x == xs[0] for x in xs) or all(y == ys[0] for y in ys):
        return RegressionFit(slope=0.0, intercept=y_mean, r2=0.0, n=n, degenerate=True)

    sxx = sum((x - x_mean) ** 2 for x in xs)
    sxy = sum((x - x_mean) * (y - y_mean) for x, y in pts)
    if sxx == 0.0:
        return RegressionFit(slope=0.0, intercept=y_mean, r2=0.0, n=n, degenerate=True)

    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in pts)
    ss_tot = sum((y - y_mean) ** 2 for y in ys)
    r2 = 1.0 - ss_res / ss_tot
    r2 = min(max(r2, 0.0), 1.0)
    return RegressionFit(slope=slope, intercept=intercept, r2=r2, n=n, degenerate=False)


def run_series(images, deltas, som: SomConfig, strategy, mode: TrainingMode,
               series_id: str = "series") -> SeriesResult:
    """Score a series and fit QE against the change percentages.

    Reference mode trains once on images[0] and scores every image with that
    frozen map. Per-image mode trains a fresh map on each image (seed offset
    by the image index, so maps differ deterministically) and reports each
    map's own post-training QE. Deterministic for fixed inputs.
    """
    images = list(images)
    deltas = [float(d) for d in deltas]
    if len(images) == 0:
        raise InputError("a series needs at least one image")
    if len(deltas) != len(images):
        raise InputError(f"{len(deltas)} deltas for {len(images)} images")
    size = (images[0].width, images[0].height)
    for img in images[1:]:
        if (img.width, img.height) != size:
            raise InputError("all images in a series must share the same dimensions")
    if som.dim != strategy.dim:
        raise InputError(
            f"map dimension {som.dim} does not match strategy {strategy.name} (dim {strategy.dim})"
        )
    mode = TrainingMode(mode)

    run_start = time.perf_counter()
    records = []
    if mode is TrainingMode.REFERENCE_TRAINED:
        t0 = time.perf_counter()
        reference = extract_vectors(images[0], strategy)
        grid = train(init_grid(som), reference)
        qe = quantization_error(grid, reference)
        records.append(ImageRecord(index=0, delta_pct=deltas[0], qe=qe,
                                   ms=(time.perf_counter() - t0) * 1000.0))
        for i, img in enumerate(images[1:], start=1):
            t0 = time.perf_counter()
            data = extract_vectors(img, strategy)
            qe = quantization_error(grid, data)
            records.append(ImageRecord(index=i, delta_pct=deltas[i], qe=qe,
                                       ms=(time.perf_counter() - t0) * 1000.0))
    else:
        for i, img in enumerate(images):
            t0 = time.perf_counter()
            data = extract_vectors(img, strategy)
            cfg = replace(som, seed=(som.seed + i) % 2**64)
            grid = train(init_grid(cfg), data)
            qe = quantization_error(grid, data)
            records.append(ImageRecord(index=i, delta_pct=deltas[i], qe=qe,
                                       ms=(time.perf_counter() - t0) * 1000.0))

    if len(records) >= 2:
        fit = linear_fit([(r.delta_pct, r.qe) for r in records])
    else:
        fit = RegressionFit(slope=0.0, intercept=records[0].qe, r2=0.0, n=1, degenerate=True)
    total_ms = (time.perf_counter() - run_start) * 1000.0
    return SeriesResult(series_id=series_id, mode=mode, strategy_name=strategy.name,
                        som_config=som, width=size[0], height=size[1],
                        records=tuple(records), fit=fit, total_ms=total_ms)


# --- reports ------------------------------------------------------------------


def _csv_text(result: SeriesResult, include_timing: bool) -> str:
    lines = ["series_id,image_index,delta_pct,qe,ms"]
    for r in result.records:
        ms = "" if not include_timing or r.ms is None else f"{r.ms:.3f}"
        lines.append(f"{result.series_id},{r.index},{r.delta_pct!r},{r.qe!r},{ms}")
    return "\n".join(lines) + "\n"


def _json_payload(result: SeriesResult, include_timing: bool) -> dict:
    som = result.som_config
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "series_id": result.series_id,
        "mode": result.mode.value,
        "strategy": result.strategy_name,
        "som": {
            "dim": som.dim,
            "rows": som.rows,
            "cols": som.cols,
            "initial_radius": som.initial_radius,
            "initial_learning_rate": som.initial_learning_rate,
            "iterations": som.iterations,
            "seed": som.seed,
        },
        "image_size": {"width": result.width, "height": result.height},
        "records": [
            {
                "index": r.index,
                "delta_pct": r.delta_pct,
                "qe": r.qe,
                "ms": r.ms if include_timing else None,
            }
            for r in result.records
        ],
        "fit": {
            "slope": result.fit.slope,
            "intercept": result.fit.intercept,
            "r2": result.fit.r2,
            "n": result.fit.n,
            "degenerate": result.fit.degenerate,
        },
        "total_ms": result.total_ms if include_timing else None,
    }


def series_result_from_json(path) -> SeriesResult:
    """Rebuild a SeriesResult from an emitted JSON report."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(payload, dict) or payload.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise FormatError(f"{path}: not a schema_version {REPORT_SCHEMA_VERSION} report")
    som = payload["som"]
    fit = payload["fit"]
    return SeriesResult(
        series_id=payload["series_id"],
        mode=TrainingMode(payload["mode"]),
        strategy_name=payload["strategy"],
        som_config=SomConfig(
            dim=som["dim"], rows=som["rows"], cols=som["cols"],
            initial_radius=som["initial_radius"],
            initial_learning_rate=som["initial_learning_rate"],
            iterations=som["iterations"], seed=som["seed"],
        ),
        width=payload["image_size"]["width"],
        height=payload["image_size"]["height"],
        records=tuple(
            ImageRecord(index=r["index"], delta_pct=r["delta_pct"], qe=r["qe"], ms=r["ms"])
            for r in payload["records"]
        ),
        fit=RegressionFit(slope=fit["slope"], intercept=fit["intercept"], r2=fit["r2"],
                          n=fit["n"], degenerate=fit["degenerate"]),
        total_ms=payload["total_ms"],
    )


_SVG_W, _SVG_H = 640, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 24, 40, 48


def _svg_text(result: SeriesResult) -> str:
    """Scatter of QE against delta with the fitted line.

    Exactly one <line> element (the fit); axes are a single <path> so the
    structure stays checkable. Degenerate fits draw their horizontal
    convention line (slope 0 at mean QE).
    """
    xs = result.deltas
    ys = result.qes
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    x_pad = 0.05 * (x_hi - x_lo)
    y_pad = 0.08 * (y_hi - y_lo)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    plot_w = _SVG_W - _MARGIN_L - _MARGIN_R
    plot_h = _SVG_H - _MARGIN_T - _MARGIN_B

    def px(x):
        return _MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return _MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<text x="{_SVG_W / 2:.2f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{result.series_id}: quantization error vs change '
        f'({result.mode.value}, {result.strategy_name})</text>',
        # axes share one path: left edge then bottom edge
        f'<path d="M {_MARGIN_L} {_MARGIN_T} L {_MARGIN_L} {_SVG_H - _MARGIN_B} '
        f'L {_SVG_W - _MARGIN_R} {_SVG_H - _MARGIN_B}" stroke="black" fill="none"/>',
        f'<text x="{_MARGIN_L + plot_w / 2:.2f}" y="{_SVG_H - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">change (percentage points)</text>',
        f'<text x="16" y="{_MARGIN_T + plot_h / 2:.2f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 16 {_MARGIN_T + plot_h / 2:.2f})">quantization error</text>',
    ]
    for tick in (x_lo + x_pad, x_hi - x_pad):
        parts.append(
            f'<text x="{px(tick):.2f}" y="{_SVG_H - _MARGIN_B + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tick:g}</text>'
        )
    for tick in (y_lo + y_pad, y_hi - y_pad):
        parts.append(
            f'<text x="{_MARGIN_L - 8}" y="{py(tick) + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{tick:.4g}</text>'
        )

    fit = result.fit
    y1 = fit.intercept + fit.slope * (x_lo + x_pad)
    y2 = fit.intercept + fit.slope * (x_hi - x_pad)
    parts.append(
        f'<line x1="{px(x_lo + x_pad):.2f}" y1="{py(y1):.2f}" '
        f'x2="{px(x_hi - x_pad):.2f}" y2="{py(y2):.2f}" stroke="#c0392b" stroke-width="1.5"/>'
    )
    for r in result.records:
        parts.append(
            f'<circle cx="{px(r.delta_pct):.2f}" cy="{py(r.qe):.2f}" r="4" '
            f'fill="#2c3e50" fill-opacity="0.85"/>'
        )
    parts.append(
        f'<text x="{_SVG_W - _MARGIN_R - 8}" y="{_MARGIN_T + 18}" text-anchor="end" '
        f'font-family="sans-serif" font-size="13">r^2 = {fit.r2:.4f}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(result: SeriesResult, base_path, formats=("csv", "json", "svg"),
                include_timing: bool = True) -> list:
    """Write ``base_path`` + .csv/.json/.svg for the requested formats.

    ``include_timing=False`` blanks the wall-time fields (empty CSV cell, JSON
    null), which makes repeated runs byte-identical. Returns written paths.
    """
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = base.with_suffix(".csv")
            path.write_text(_csv_text(result, include_timing))
        elif fmt == "json":
            path = base.with_suffix(".json")
            path.write_text(
                json.dumps(_json_payload(result, include_timing), indent=2, sort_keys=True) + "\n"
            )
        elif fmt == "svg":
            path = base.with_suffix(".svg")
            path.write_text(_svg_text(result))
        else:
            raise InputError(f"unknown report format {fmt!r}, expected csv, json, or svg")
        written.append(path)
    return written
