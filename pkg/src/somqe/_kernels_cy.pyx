# cython: language_level=3, boundscheck=False, wraparound=False
# cython: initializedcheck=False, cdivision=True
"""Compiled training and scoring kernels.

Same contracts as ``somqe._kernels_py``. The arithmetic order matches the
NumPy fallback exactly (ascending-component distance sums, dataset-order
accumulation), so both backends produce bit-identical results.
"""

from libc.math cimport sqrt

import numpy as np

NAME = "cython"


def bmu_batch(const double[:, ::1] weights, const double[:, ::1] data):
    """Best matching cell per vector: (linear indices, Euclidean distances)."""
    cdef Py_ssize_t n = data.shape[0]
    cdef Py_ssize_t n_cells = weights.shape[0]
    cdef Py_ssize_t dim = weights.shape[1]
    idx_arr = np.empty(n, dtype=np.intp)
    dist_arr = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t[::1] idx = idx_arr
    cdef double[::1] dist = dist_arr
    cdef Py_ssize_t i, c, d, best_c
    cdef double s, diff, best
    cdef double inf = float("inf")
    with nogil:
        for i in range(n):
            best = inf
            best_c = 0
            for c in range(n_cells):
                s = 0.0
                for d in range(dim):
                    diff = data[i, d] - weights[c, d]
                    s += diff * diff
                if s < best:
                    best = s
                    best_c = c
            idx[i] = best_c
            dist[i] = sqrt(best)
    return idx_arr, dist_arr


def qe_sum(const double[:, ::1] weights, const double[:, ::1] data):
    """Sum of per-vector BMU distances, accumulated sequentially in dataset order."""
    cdef Py_ssize_t n = data.shape[0]
    cdef Py_ssize_t n_cells = weights.shape[0]
    cdef Py_ssize_t dim = weights.shape[1]
    cdef Py_ssize_t i, c, d
    cdef double s, diff, best, total = 0.0
    cdef double inf = float("inf")
    with nogil:
        for i in range(n):
            best = inf
            for c in range(n_cells):
                s = 0.0
                for d in range(dim):
                    diff = data[i, d] - weights[c, d]
                    s += diff * diff
                if s < best:
                    best = s
            total += sqrt(best)
    return total


def train_chunk(double[:, ::1] weights, const double[:, ::1] data,
                const Py_ssize_t[::1] indices, const double[::1] alphas,
                const double[:, ::1] htable, const Py_ssize_t[:, ::1] gd2):
    """Run a block of online training steps, updating ``weights`` in place.

    htable[t, g] holds the neighborhood factor at squared grid distance g for
    chunk-local step t; gd2 holds squared grid distances between cells.
    """
    cdef Py_ssize_t nsteps = indices.shape[0]
    cdef Py_ssize_t n_cells = weights.shape[0]
    cdef Py_ssize_t dim = weights.shape[1]
    cdef Py_ssize_t t, c, d, bmu, xi
    cdef double s, diff, best, factor, alpha
    cdef double inf = float("inf")
    with nogil:
        for t in range(nsteps):
            xi = indices[t]
            best = inf
            bmu = 0
            for c in range(n_cells):
                s = 0.0
                for d in range(dim):
                    diff = data[xi, d] - weights[c, d]
                    s += diff * diff
                if s < best:
                    best = s
                    bmu = c
            alpha = alphas[t]
            for c in range(n_cells):
                factor = alpha * htable[t, gd2[c, bmu]]
                for d in range(dim):
                    weights[c, d] = weights[c, d] + factor * (data[xi, d] - weights[c, d])
    return None
