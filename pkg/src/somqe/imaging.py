"""Synthetic bilevel image series and grayscale file I/O.

Five deterministic generators produce series whose white-pixel content changes
by a known percentage per image: scattered white pixels on black, scattered
black pixels on white, a checkerboard filling cell by cell, a checkerboard
with growing squares, and a single growing central square. Every generated
pixel is 0 or 255.

File formats: binary PGM (P5, maxval 255, bit-exact round trip) and 8-bit
grayscale PNG. A JSON manifest written next to each generated series records
the spec and per-image filenames, target deltas, and achieved white fractions.

All "round to nearest" steps here round halves up, so targets resolve the same
way on every platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, FormatError, InputError
from .features import GrayImage

DEFAULT_WIDTH = 792
DEFAULT_HEIGHT = 777
DEFAULT_BASELINE = 20.0

MANIFEST_SCHEMA_VERSION = 1


class SeriesKind(str, Enum):
    RANDOM_WHITE = "random-white"
    RANDOM_BLACK = "random-black"
    CHECKER_COUNT = "checker-count"
    CHECKER_SIZE = "checker-size"
    CENTRAL_SQUARE = "central-square"

    @property
    def is_random(self) -> bool:
        return self in (SeriesKind.RANDOM_WHITE, SeriesKind.RANDOM_BLACK)

    @property
    def is_checker(self) -> bool:
        return self in (SeriesKind.CHECKER_COUNT, SeriesKind.CHECKER_SIZE)


# per-kind default change percentages; first entry of a random series is the
# unchanged reference image
DEFAULT_DELTAS = {
    SeriesKind.RANDOM_WHITE: (0.0, 10.0, 22.5, 35.0, 47.5, 60.0),
    SeriesKind.RANDOM_BLACK: (0.0, 20.0, 30.0),
    SeriesKind.CHECKER_COUNT: (8.0, 16.0, 24.0, 32.0, 40.0, 48.0, 56.0, 64.0, 72.0),
    SeriesKind.CHECKER_SIZE: (2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0),
    SeriesKind.CENTRAL_SQUARE: (1.0, 2.0, 4.0, 8.0, 16.0, 32.0),
}

DEFAULT_CELLS = {
    SeriesKind.CHECKER_COUNT: 5,
    SeriesKind.CHECKER_SIZE: 3,
}


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class SeriesSpec:
    """Declarative description of one synthetic series.

    ``deltas`` are percentage points of total image area, one per image;
    ``baseline_density`` is the foreground fraction of the reference image
    (random kinds only); ``cells`` subdivides the image for checker kinds.
    ``deltas=None`` / ``cells=None`` select the per-kind defaults.
    """

    kind: SeriesKind
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    deltas: tuple = None
    baseline_density: float = DEFAULT_BASELINE
    cells: int = None
    seed: int = 0

    def __post_init__(self):
        kind = SeriesKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.width < 1 or self.height < 1:
            raise ConfigError("image dimensions must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")

        deltas = self.deltas
        if deltas is None:
            deltas = DEFAULT_DELTAS[kind]
        deltas = tuple(float(d) for d in deltas)
        if len(deltas) == 0:
            raise ConfigError("a series needs at least one delta")
        if any(b < a for a, b in zip(deltas, deltas[1:])):
            raise ConfigError("deltas must be non-decreasing")
        object.__setattr__(self, "deltas", deltas)

        cells = self.cells
        if kind.is_checker:
            if cells is None:
                cells = DEFAULT_CELLS[kind]
            if cells < 1:
                raise ConfigError("cells must be positive")
            if self.width < cells or self.height < cells:
                raise ConfigError("image too small for the requested cell grid")
        else:
            cells = None
        object.__setattr__(self, "cells", cells)

        if kind.is_random:
            if deltas[0] != 0.0:
                raise ConfigError("random series must start at delta 0 (the reference image)")
            if not 0 <= self.baseline_density <= 100:
                raise ConfigError("baseline_density must lie in [0, 100]")
            if self.baseline_density + deltas[-1] > 100:
                raise ConfigError("baseline plus largest delta exceeds 100% of the image")
        if deltas[0] < 0 or deltas[-1] > 100:
            raise ConfigError("deltas must lie in [0, 100]")

    @property
    def count(self) -> int:
        return len(self.deltas)


def gen_random_contrast_series(spec: SeriesSpec) -> list:
    """Scattered-contrast series: cumulative random foreground on a plain ground.

    White on black for random-white, black on white for random-black. Image i
    holds exactly round((baseline + deltas[i]) / 100 * W * H) foreground pixels
    at positions taken from one seeded permutation, so each image's foreground
    is a superset of the previous one's.
    """
    if not spec.kind.is_random:
        raise InputError(f"series kind {spec.kind.value} is not a random-contrast kind")
    total = spec.width * spec.height
    counts = [
        _round_half_up((spec.baseline_density + d) / 100 * total) for d in spec.deltas
    ]
    # placement stream is independent of any map-training stream
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(total)

    white_on_black = spec.kind is SeriesKind.RANDOM_WHITE
    ground, fore = (0, 255) if white_on_black else (255, 0)
    images = []
    for count in counts:
        flat = np.full(total, ground, dtype=np.uint8)
        flat[order[:count]] = fore
        images.append(GrayImage(pixels=flat.reshape(spec.height, spec.width)))
    return images


def _cell_edges(extent: int, cells: int) -> list:
    """Split ``extent`` pixels into ``cells`` spans; the last span takes the
    remainder so spans tile the extent exactly."""
    size = extent // cells
    return [
        (k * size, (k + 1) * size if k < cells - 1 else extent) for k in range(cells)
    ]


def _checker_cell_order(cells: int) -> list:
    """All (row, col) cells, even-parity diagonal first, row-major within each
    parity; filling cells in this order grows a checkerboard."""
    grid = [(r, c) for r in range(cells) for c in range(cells)]
    return [rc for rc in grid if sum(rc) % 2 == 0] + [rc for rc in grid if sum(rc) % 2 == 1]


def gen_checker_count_series(spec: SeriesSpec) -> list:
    """Checkerboard-fill series: image i whitens the first
    round(deltas[i] / 100 * cells^2) cells of the interleaved cell order."""
    if spec.kind is not SeriesKind.CHECKER_COUNT:
        raise InputError(f"series kind {spec.kind.value} is not checker-count")
    row_edges = _cell_edges(spec.height, spec.cells)
    col_edges = _cell_edges(spec.width, spec.cells)
    order = _checker_cell_order(spec.cells)

    images = []
    for delta in spec.deltas:
        n_white = _round_half_up(delta / 100 * spec.cells**2)
        pixels = np.zeros((spec.height, spec.width), dtype=np.uint8)
        for r, c in order[:n_white]:
            r0, r1 = row_edges[r]
            c0, c1 = col_edges[c]
            pixels[r0:r1, c0:c1] = 255
        images.append(GrayImage(pixels=pixels))
    return images


def checker_count_cells_white(spec: SeriesSpec) -> list:
    """Whole-cell counts actually drawn per image (deltas that are not whole
    cells land on the nearest count; callers record these in the manifest)."""
    return [_round_half_up(d / 100 * spec.cells**2) for d in spec.deltas]


def _checker_size_sides(spec: SeriesSpec, delta: float) -> list:
    """Square sides per cell (row-major) whose total area best approximates
    delta% of the image.

    A single common side can miss the target by more than the advertised
    tolerance (side granularity is cells^2 * (2s+1) pixels), so the first few
    cells get side s+1 and the rest side s, choosing the split that lands
    nearest the exact target area.
    """
    ncells = spec.cells**2
    target = delta / 100 * spec.width * spec.height
    s = math.isqrt(math.floor(target / ncells))
    upgraded = _round_half_up((target - ncells * s * s) / (2 * s + 1))
    upgraded = min(max(upgraded, 0), ncells)
    return [s + 1 if i < upgraded else s for i in range(ncells)]


def gen_checker_size_series(spec: SeriesSpec) -> list:
    """Growing-squares series: one white square centered in each of
    cells x cells cells, sized so total white area tracks deltas[i]%."""
    if spec.kind is not SeriesKind.CHECKER_SIZE:
        raise InputError(f"series kind {spec.kind.value} is not checker-size")
    row_edges = _cell_edges(spec.height, spec.cells)
    col_edges = _cell_edges(spec.width, spec.cells)

    images = []
    for delta in spec.deltas:
        sides = _checker_size_sides(spec, delta)
        pixels = np.zeros((spec.height, spec.width), dtype=np.uint8)
        i = 0
        for r0, r1 in row_edges:
            for c0, c1 in col_edges:
                side = sides[i]
                i += 1
                if side > min(r1 - r0, c1 - c0):
                    raise ConfigError(
                        f"delta {delta}% needs a {side}px square, larger than its cell"
                    )
                if side == 0:
                    continue
                top = r0 + (r1 - r0 - side) // 2
                left = c0 + (c1 - c0 - side) // 2
                pixels[top : top + side, left : left + side] = 255
        images.append(GrayImage(pixels=pixels))
    return images


def gen_central_square_series(spec: SeriesSpec) -> list:
    """Central-square series: one white square of side
    round(sqrt(deltas[i] / 100 * W * H)) centered at (W//2, H//2)."""
    if spec.kind is not SeriesKind.CENTRAL_SQUARE:
        raise InputError(f"series kind {spec.kind.value} is not central-square")
    cx, cy = spec.width // 2, spec.height // 2

    images = []
    for delta in spec.deltas:
        side = _round_half_up(math.sqrt(delta / 100 * spec.width * spec.height))
        left, top = cx - side // 2, cy - side // 2
        if side > 0 and (left < 0 or top < 0 or left + side > spec.width or top + side > spec.height):
            raise ConfigError(f"delta {delta}% needs a {side}px square, larger than the image")
        pixels = np.zeros((spec.height, spec.width), dtype=np.uint8)
        if side > 0:
            pixels[top : top + side, left : left + side] = 255
        images.append(GrayImage(pixels=pixels))
    return images


_GENERATORS = {
    SeriesKind.RANDOM_WHITE: gen_random_contrast_series,
    SeriesKind.RANDOM_BLACK: gen_random_contrast_series,
    SeriesKind.CHECKER_COUNT: gen_checker_count_series,
    SeriesKind.CHECKER_SIZE: gen_checker_size_series,
    SeriesKind.CENTRAL_SQUARE: gen_central_square_series,
}


def generate_series(spec: SeriesSpec) -> list:
    """Generate all images of ``spec``; same spec, same bytes, every time."""
    return _GENERATORS[spec.kind](spec)


def measure_white_fraction(image: GrayImage) -> float:
    """Percentage of pixels at exactly 255."""
    count = int(np.count_nonzero(image.pixels == 255))
    return 100.0 * count / (image.width * image.height)


# --- file I/O ---------------------------------------------------------------


def _read_pgm_tokens(data: bytes, n: int, start: int):
    """Read ``n`` whitespace-separated integer tokens from PGM header bytes,
    skipping '#' comments; returns (values, offset past the final token)."""
    values = []
    i = start
    while len(values) < n:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and data[j : j + 1].isdigit():
            j += 1
        if j == i:
            raise FormatError("malformed PGM header")
        values.append(int(data[i:j]))
        i = j
    return values, i


def _load_pgm(path: Path) -> GrayImage:
    data = path.read_bytes()
    if data[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    try:
        (width, height, maxval), offset = _read_pgm_tokens(data, 3, 2)
    except FormatError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if maxval != 255:
        raise FormatError(f"{path}: unsupported PGM maxval {maxval}, expected 255")
    if width < 1 or height < 1:
        raise FormatError(f"{path}: invalid PGM dimensions {width}x{height}")
    # exactly one whitespace byte separates the header from the raster
    offset += 1
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise FormatError(f"{path}: PGM pixel data truncated")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels=pixels)


def _save_pgm(image: GrayImage, path: Path):
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    path.write_bytes(header + image.pixels.tobytes())


def _load_png(path: Path) -> GrayImage:
    with Image.open(path) as img:
        if img.mode != "L":
            raise FormatError(f"{path}: PNG mode {img.mode!r} unsupported, expected 8-bit grayscale")
        pixels = np.asarray(img, dtype=np.uint8)
    return GrayImage(pixels=pixels)


def _save_png(image: GrayImage, path: Path):
    Image.fromarray(image.pixels, mode="L").save(path, format="PNG")


def load_image(path) -> GrayImage:
    """Read a PGM (P5) or 8-bit grayscale PNG file, chosen by extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return _load_pgm(path)
    if suffix == ".png":
        return _load_png(path)
    raise FormatError(f"{path}: unsupported image format {suffix!r}, expected .pgm or .png")


def save_image(image: GrayImage, path):
    """Write PGM (P5, bit-exact round trip) or 8-bit grayscale PNG, by extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        _save_pgm(image, path)
    elif suffix == ".png":
        _save_png(image, path)
    else:
        raise FormatError(f"{path}: unsupported image format {suffix!r}, expected .pgm or .png")


# --- series manifest ---------------------------------------------------------


def write_series_manifest(path, spec: SeriesSpec, filenames: list, images: list):
    """Write the JSON manifest for a generated series: spec fields plus one
    record per image (filename, target delta, achieved white fraction, and the
    whole-cell count for checker-count). Content is fully deterministic."""
    records = []
    cells_white = checker_count_cells_white(spec) if spec.kind is SeriesKind.CHECKER_COUNT else None
    for i, (name, image) in enumerate(zip(filenames, images)):
        record = {
            "index": i,
            "filename": name,
            "delta_pct": spec.deltas[i],
            "white_fraction_pct": measure_white_fraction(image),
        }
        if cells_white is not None:
            record["cells_white"] = cells_white[i]
        records.append(record)
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "kind": spec.kind.value,
        "width": spec.width,
        "height": spec.height,
        "deltas": list(spec.deltas),
        "baseline_density": spec.baseline_density if spec.kind.is_random else None,
        "cells": spec.cells,
        "seed": spec.seed,
        "images": records,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_series_manifest(path) -> dict:
    """Load and sanity-check a series manifest written by this package."""
    try:
        manifest = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(manifest, dict):
        raise FormatError(f"{path}: manifest must be a JSON object")
    for key in ("schema_version", "kind", "images"):
        if key not in manifest:
            raise FormatError(f"{path}: manifest missing {key!r}")
    if manifest["schema_version"] != MANIFEST_SCHEMA_VERSION:
        raise FormatError(
            f"{path}: unsupported manifest schema_version {manifest['schema_version']!r}"
        )
    for record in manifest["images"]:
        if "filename" not in record or "delta_pct" not in record:
            raise FormatError(f"{path}: image records need filename and delta_pct")
    return manifest
