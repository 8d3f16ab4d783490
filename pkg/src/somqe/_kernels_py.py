"""NumPy fallback kernels.

Mirrors the compiled extension operation for operation. Squared distances
accumulate in ascending component order and the quantization error sums in
dataset order, exactly like the C loops, so the two backends return
bit-identical values.
"""

from __future__ import annotations

import numpy as np

NAME = "python"

_ROW_CHUNK = 65536  # bounds the (chunk, n_cells) distance matrix


def _sq_dists(weights: np.ndarray, chunk: np.ndarray) -> np.ndarray:
    # (n, n_cells) squared Euclidean distances, one component at a time
    d2 = np.zeros((chunk.shape[0], weights.shape[0]))
    for d in range(weights.shape[1]):
        diff = chunk[:, d, np.newaxis] - weights[np.newaxis, :, d]
        d2 += diff * diff
    return d2


def bmu_batch(weights: np.ndarray, data: np.ndarray):
    """Best matching cell per vector: (linear indices, Euclidean distances)."""
    idx_parts = []
    dist_parts = []
    for start in range(0, data.shape[0], _ROW_CHUNK):
        chunk = data[start:start + _ROW_CHUNK]
        d2 = _sq_dists(weights, chunk)
        idx = np.argmin(d2, axis=1)
        idx_parts.append(idx.astype(np.intp))
        dist_parts.append(np.sqrt(d2[np.arange(chunk.shape[0]), idx]))
    return np.concatenate(idx_parts), np.concatenate(dist_parts)


def qe_sum(weights: np.ndarray, data: np.ndarray) -> float:
    """Sum of per-vector BMU distances, accumulated sequentially in dataset order."""
    total = 0.0
    for start in range(0, data.shape[0], _ROW_CHUNK):
        d2 = _sq_dists(weights, data[start:start + _ROW_CHUNK])
        for value in np.sqrt(d2.min(axis=1)).tolist():
            total += value
    return total


def train_chunk(weights, data, indices, alphas, htable, gd2) -> None:
    """Run a block of online training steps, updating ``weights`` in place.

    weights: (n_cells, dim), mutated. data: (n, dim). indices/alphas: one entry
    per step. htable[t, g]: neighborhood factor at squared grid distance g.
    gd2: (n_cells, n_cells) squared grid distances.
    """
    n_cells, dim = weights.shape
    for t in range(indices.shape[0]):
        x = data[indices[t]]
        diff = x - weights
        d2 = np.zeros(n_cells)
        for d in range(dim):
            d2 += diff[:, d] * diff[:, d]
        bmu = int(np.argmin(d2))
        factor = alphas[t] * htable[t, gd2[:, bmu]]
        weights += factor[:, np.newaxis] * diff
