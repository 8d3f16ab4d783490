"""Grayscale images and the strategies that turn them into feature vectors.

Every strategy maps an image to an (n, dim) dataset with components in [0, 1],
scanning pixels (or patches) row-major so the vector order is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .som import FeatureDataset


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale raster, pixels indexed [row, column]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise InputError("pixels must form a non-empty 2-D array")
        if p.dtype != np.uint8:
            raise InputError(f"pixels must be uint8, got {p.dtype}")
        p = np.ascontiguousarray(p).copy()
        p.flags.writeable = False
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class PixelScalar:
    """One vector per pixel: (intensity / 255,). dim = 1."""

    @property
    def dim(self) -> int:
        return 1

    @property
    def name(self) -> str:
        return "pixel"

    def extract(self, image: GrayImage) -> np.ndarray:
        return image.pixels.reshape(-1, 1) / 255.0


@dataclass(frozen=True)
class Patch:
    """One vector per non-overlapping size x size block, flattened row-major
    and scaled by 1/255. Partial blocks at the right and bottom edges are
    dropped. dim = size * size."""

    size: int = 4

    def __post_init__(self):
        if self.size < 1:
            raise InputError("patch size must be at least 1")

    @property
    def dim(self) -> int:
        return self.size * self.size

    @property
    def name(self) -> str:
        return f"patch{self.size}"

    def extract(self, image: GrayImage) -> np.ndarray:
        k = self.size
        ph = image.height // k
        pw = image.width // k
        if ph < 1 or pw < 1:
            raise InputError(
                f"image {image.width}x{image.height} is smaller than one {k}x{k} patch"
            )
        cropped = image.pixels[: ph * k, : pw * k]
        # (ph, pw, k, k) blocks in row-major patch order, each block row-major
        blocks = cropped.reshape(ph, k, pw, k).transpose(0, 2, 1, 3)
        return blocks.reshape(ph * pw, k * k) / 255.0


@dataclass(frozen=True)
class PixelPosition:
    """One vector per pixel: (x/(w-1), y/(h-1), intensity/255). dim = 3.

    The default for change analysis. A map trained on these learns a coarse
    position+intensity tiling of the reference image, so pixels whose
    intensity later flips sit far from their region's prototype and QE grows
    with the changed area. Intensity-only and patch encodings lose that
    sensitivity once the map holds prototypes for both tones.

    A 1-pixel-wide or 1-pixel-tall image has no extent along that axis; the
    coordinate is 0 there.
    """

    @property
    def dim(self) -> int:
        return 3

    @property
    def name(self) -> str:
        return "pixel-position"

    def extract(self, image: GrayImage) -> np.ndarray:
        h, w = image.height, image.width
        xs = np.arange(w, dtype=np.float64) / (w - 1) if w > 1 else np.zeros(w)
        ys = np.arange(h, dtype=np.float64) / (h - 1) if h > 1 else np.zeros(h)
        out = np.empty((h * w, 3))
        out[:, 0] = np.tile(xs, h)
        out[:, 1] = np.repeat(ys, w)
        out[:, 2] = image.pixels.reshape(-1) / 255.0
        return out


_STRATEGY_NAMES = ("pixel", "patch", "pixel-position")


def strategy_from_name(name: str, patch_size: int = 4):
    """Build a strategy from its CLI/report name."""
    if name == "pixel":
        return PixelScalar()
    if name == "patch":
        return Patch(size=patch_size)
    if name == "pixel-position":
        return PixelPosition()
    raise InputError(f"unknown strategy {name!r}, expected one of {', '.join(_STRATEGY_NAMES)}")


def extract_vectors(image: GrayImage, strategy) -> FeatureDataset:
    """Apply ``strategy`` to ``image``; components always land in [0, 1]."""
    vectors = strategy.extract(image)
    return FeatureDataset(dim=strategy.dim, vectors=vectors)
