"""Self-organizing map: grid state, online training, BMU search, quantization error.

Training follows the classic online Kohonen scheme on a rectangular lattice:
at each step one input vector is drawn uniformly at random, its best matching
unit (BMU) is located by Euclidean distance, and every weight moves toward the
input by ``alpha(t) * h(d, sigma(t))`` where ``h`` is a Gaussian of the lattice
distance ``d`` to the BMU. Learning rate and radius decay exponentially with a
time constant equal to the total iteration count.

Determinism: one PCG64 stream, seeded with ``SomConfig.seed``, supplies first
the initial weights and then the per-step sample indices, so a (config, data)
pair reproduces a run bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import backend
from .errors import ConfigError, InputError

# steps per kernel call; bounds the precomputed neighborhood table
_TRAIN_CHUNK = 1024


@dataclass(frozen=True)
class SomConfig:
    """Map hyperparameters. Defaults follow the reference setup: a 4x4 map,
    initial neighborhood radius 1.2, learning rate 0.2, 10,000 iterations."""

    dim: int
    rows: int = 4
    cols: int = 4
    initial_radius: float = 1.2
    initial_learning_rate: float = 0.2
    iterations: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("grid must have at least one row and one column")
        if self.dim < 1:
            raise ConfigError("vector dimensionality must be at least 1")
        if not self.initial_radius > 0:
            raise ConfigError("initial_radius must be positive")
        if not 0 < self.initial_learning_rate <= 1:
            raise ConfigError("initial_learning_rate must lie in (0, 1]")
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True, eq=False)
class SomGrid:
    """Lattice of weight vectors, shape (rows, cols, dim). Immutable.

    ``rng`` carries the generator stream between ``init_grid`` and ``train``;
    a trained grid can be shared freely for concurrent read-only scoring.
    """

    config: SomConfig
    weights: np.ndarray
    rng: np.random.Generator | None = field(default=None, repr=False)

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        expected = (self.config.rows, self.config.cols, self.config.dim)
        if w.shape != expected:
            raise InputError(f"weights shape {w.shape} does not match grid shape {expected}")
        if not np.all(np.isfinite(w)):
            raise InputError("every weight component must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def n_cells(self) -> int:
        return self.config.n_cells

    def weights_2d(self) -> np.ndarray:
        """Row-major (n_cells, dim) view of the weights."""
        return self.weights.reshape(self.n_cells, self.config.dim)


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    """Fixed-dimension feature vectors extracted from one image.

    Extraction (see ``somqe.features``) always yields components in [0, 1];
    the container itself only requires finite values so that rescaled copies
    of a dataset remain usable.
    """

    dim: int
    vectors: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        if v.ndim != 2 or v.shape[0] < 1:
            raise InputError("vectors must form a non-empty (n, dim) array")
        if self.dim < 1 or v.shape[1] != self.dim:
            raise InputError(f"vectors have {v.shape[1]} components, expected dim={self.dim}")
        if not np.all(np.isfinite(v)):
            raise InputError("every vector component must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "vectors", v)

    @classmethod
    def from_array(cls, vectors) -> "FeatureDataset":
        v = np.asarray(vectors, dtype=np.float64)
        if v.ndim != 2:
            raise InputError("expected a 2-D (n, dim) array")
        return cls(dim=v.shape[1], vectors=v)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]


class BmuResult(NamedTuple):
    """Best matching unit: lattice position and Euclidean distance."""

    row: int
    col: int
    distance: float


def init_grid(config: SomConfig) -> SomGrid:
    """Create a grid with weights drawn uniformly from [0, 1).

    The PCG64 stream seeded here is attached to the grid so that ``train``
    continues the same stream; the same config therefore always produces the
    same weights and, later, the same training run.
    """
    rng = np.random.default_rng(config.seed)
    weights = rng.random((config.rows, config.cols, config.dim))
    return SomGrid(config=config, weights=weights, rng=rng)


def find_bmu(grid: SomGrid, vector) -> BmuResult:
    """Grid cell whose weight is nearest (Euclidean) to ``vector``.

    Ties go to the lowest row-major cell index.
    """
    v = np.ascontiguousarray(np.asarray(vector, dtype=np.float64))
    if v.ndim != 1 or v.shape[0] != grid.config.dim:
        raise InputError(
            f"input vector has shape {v.shape}, expected ({grid.config.dim},)"
        )
    idx, dist = backend.kernels().bmu_batch(grid.weights_2d(), v[np.newaxis, :])
    row, col = divmod(int(idx[0]), grid.config.cols)
    return BmuResult(row=row, col=col, distance=float(dist[0]))


def neighborhood_factor(grid_distance: float, radius: float) -> float:
    """Gaussian neighborhood weight exp(-d^2 / (2 r^2)) for lattice distance d."""
    if not radius > 0:
        raise ConfigError("radius must be positive")
    if grid_distance < 0:
        raise InputError("grid_distance must be non-negative")
    return math.exp(-(grid_distance * grid_distance) / (2.0 * radius * radius))


def decay_at(initial_value: float, t: int, total_iterations: int) -> float:
    """Exponential schedule ``initial_value * exp(-t / total_iterations)``.

    Applied identically to the learning rate and the neighborhood radius.
    """
    if total_iterations <= 0:
        raise ConfigError("total_iterations must be positive")
    if not initial_value > 0:
        raise ConfigError("initial_value must be positive")
    if t < 0 or t > total_iterations:
        raise InputError("step index must lie in [0, total_iterations]")
    return initial_value * math.exp(-t / total_iterations)


def _grid_sq_distances(rows: int, cols: int) -> np.ndarray:
    """(n_cells, n_cells) squared lattice distances between cell coordinates."""
    coords = np.indices((rows, cols)).reshape(2, -1).T
    diff = coords[:, np.newaxis, :] - coords[np.newaxis, :, :]
    return np.ascontiguousarray((diff**2).sum(axis=2).astype(np.intp))


def _neighborhood_table(sigmas, gmax: int) -> np.ndarray:
    """htable[t, g] = exp(-g / (2 sigma_t^2)) for squared lattice distance g."""
    table = np.empty((len(sigmas), gmax + 1))
    for t, sigma in enumerate(sigmas):
        two_sq = 2.0 * sigma * sigma
        row = table[t]
        for g in range(gmax + 1):
            row[g] = math.exp(-(g / two_sq))
    return table


def train(grid: SomGrid, data: FeatureDataset) -> SomGrid:
    """Run ``config.iterations`` online training steps and return the new grid.

    Each step draws one vector uniformly at random (with replacement) from
    ``data``, using the generator attached by ``init_grid``; a grid built
    without one gets a fresh stream seeded from ``config.seed`` advanced past
    the initial-weight draw, which makes the two paths sample identically.
    Fully deterministic for a given (config, data) pair.
    """
    cfg = grid.config
    if data.dim != cfg.dim:
        raise InputError(f"dataset dimension {data.dim} does not match map dimension {cfg.dim}")
    if cfg.iterations == 0:
        return SomGrid(config=cfg, weights=grid.weights, rng=grid.rng)

    rng = grid.rng
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
        rng.random((cfg.rows, cfg.cols, cfg.dim))

    total = cfg.iterations
    indices = rng.integers(0, data.n, size=total).astype(np.intp)
    alphas = np.array([decay_at(cfg.initial_learning_rate, t, total) for t in range(total)])
    sigmas = [decay_at(cfg.initial_radius, t, total) for t in range(total)]
    gd2 = _grid_sq_distances(cfg.rows, cfg.cols)
    gmax = int(gd2.max())

    weights = grid.weights_2d().copy()
    kern = backend.kernels()
    for start in range(0, total, _TRAIN_CHUNK):
        stop = min(start + _TRAIN_CHUNK, total)
        htable = _neighborhood_table(sigmas[start:stop], gmax)
        kern.train_chunk(weights, data.vectors, indices[start:stop],
                         alphas[start:stop], htable, gd2)
    return SomGrid(config=cfg, weights=weights.reshape(cfg.rows, cfg.cols, cfg.dim), rng=rng)


def quantization_error(grid: SomGrid, data: FeatureDataset) -> float:
    """Mean Euclidean distance from each vector to its BMU weight.

    Accumulates in dataset order, so the value is reproducible exactly.
    """
    if data.dim != grid.config.dim:
        raise InputError(f"dataset dimension {data.dim} does not match map dimension {grid.config.dim}")
    total = backend.kernels().qe_sum(grid.weights_2d(), data.vectors)
    return total / data.n
