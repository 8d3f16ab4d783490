"""Map core: config validation, init, BMU search, decay, training, QE.

Oracles: BMU and QE against exhaustive numpy scans; training against a
from-scratch pure-Python reimplementation of the online update loop, which
must agree bit for bit (same draws, same arithmetic order).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from somqe import (
    ConfigError,
    FeatureDataset,
    InputError,
    SomConfig,
    SomGrid,
    backend,
    decay_at,
    find_bmu,
    init_grid,
    neighborhood_factor,
    quantization_error,
    train,
)


@pytest.fixture(params=["cython", "python"])
def kernel_backend(request):
    """Run the decorated test under each kernel backend that is built."""
    try:
        backend.set_backend(request.param)
    except ConfigError:
        pytest.skip(f"{request.param} backend not built")
    yield request.param
    for name in ("cython", "python"):
        try:
            backend.set_backend(name)
            break
        except ConfigError:
            continue


def brute_force_bmu(weights_2d, vector):
    """Exhaustive scan: (linear index, distance) of the nearest weight."""
    d2 = ((np.asarray(weights_2d) - np.asarray(vector)) ** 2).sum(axis=1)
    idx = int(np.argmin(d2))
    return idx, math.sqrt(d2[idx])


def brute_force_qe(weights_2d, vectors):
    """Exhaustive mean nearest-weight distance, computed independently."""
    w = np.asarray(weights_2d)
    v = np.asarray(vectors)
    d2 = ((v[:, np.newaxis, :] - w[np.newaxis, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.min(axis=1)).mean())


def train_oracle(cfg: SomConfig, data):
    """Pure-Python reimplementation of the full training loop.

    Draws the same generator stream and applies the same update expression
    in the same order as train(), so results must match exactly.
    """
    rng = np.random.default_rng(cfg.seed)
    weights = [list(w) for w in rng.random((cfg.rows, cfg.cols, cfg.dim)).reshape(-1, cfg.dim)]
    indices = rng.integers(0, len(data), size=cfg.iterations).astype(np.intp).tolist()
    coords = [(r, c) for r in range(cfg.rows) for c in range(cfg.cols)]
    total = cfg.iterations
    for t in range(total):
        x = data[indices[t]]
        best = float("inf")
        bmu = 0
        for ci, w in enumerate(weights):
            s = 0.0
            for d in range(cfg.dim):
                diff = x[d] - w[d]
                s += diff * diff
            if s < best:
                best = s
                bmu = ci
        alpha = cfg.initial_learning_rate * math.exp(-t / total)
        sigma = cfg.initial_radius * math.exp(-t / total)
        two_s2 = 2.0 * sigma * sigma
        br, bc = coords[bmu]
        for ci, w in enumerate(weights):
            g = (coords[ci][0] - br) ** 2 + (coords[ci][1] - bc) ** 2
            factor = alpha * math.exp(-(g / two_s2))
            for d in range(cfg.dim):
                w[d] = w[d] + factor * (x[d] - w[d])
    return np.array(weights).reshape(cfg.rows, cfg.cols, cfg.dim)


class TestSomConfig:
    def test_defaults(self):
        cfg = SomConfig(dim=16)
        assert (cfg.rows, cfg.cols) == (4, 4)
        assert cfg.initial_radius == 1.2
        assert cfg.initial_learning_rate == 0.2
        assert cfg.iterations == 10000
        assert cfg.seed == 0
        assert cfg.n_cells == 16

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dim": 0},
            {"dim": 2, "rows": 0},
            {"dim": 2, "cols": 0},
            {"dim": 2, "initial_radius": 0.0},
            {"dim": 2, "initial_radius": -1.0},
            {"dim": 2, "initial_learning_rate": 0.0},
            {"dim": 2, "initial_learning_rate": 1.5},
            {"dim": 2, "iterations": -1},
            {"dim": 2, "seed": -1},
            {"dim": 2, "seed": 2**64},
        ],
    )
    def test_invalid_config_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            SomConfig(**kwargs)


class TestInitGrid:
    def test_same_seed_same_weights(self):
        a = init_grid(SomConfig(dim=5, seed=7))
        b = init_grid(SomConfig(dim=5, seed=7))
        assert np.array_equal(a.weights, b.weights)

    def test_different_seeds_differ(self):
        a = init_grid(SomConfig(dim=5, seed=7))
        b = init_grid(SomConfig(dim=5, seed=8))
        assert not np.array_equal(a.weights, b.weights)

    def test_shape_and_range(self):
        grid = init_grid(SomConfig(dim=16))
        assert grid.weights.shape == (4, 4, 16)
        assert np.all(grid.weights >= 0.0) and np.all(grid.weights < 1.0)

    def test_single_cell_grid(self):
        grid = init_grid(SomConfig(dim=1, rows=1, cols=1))
        assert grid.weights.shape == (1, 1, 1)
        assert 0.0 <= grid.weights[0, 0, 0] < 1.0

    def test_weights_are_read_only(self):
        grid = init_grid(SomConfig(dim=2))
        with pytest.raises(ValueError):
            grid.weights[0, 0, 0] = 0.5


class TestSomGrid:
    def test_shape_mismatch_rejected(self):
        cfg = SomConfig(dim=3, rows=2, cols=2)
        with pytest.raises(InputError):
            SomGrid(config=cfg, weights=np.zeros((2, 2, 4)))

    def test_non_finite_rejected(self):
        cfg = SomConfig(dim=1, rows=1, cols=2)
        with pytest.raises(InputError):
            SomGrid(config=cfg, weights=np.array([[[np.nan], [0.0]]]))

    def test_weights_2d_is_row_major(self):
        cfg = SomConfig(dim=1, rows=2, cols=2)
        grid = SomGrid(config=cfg, weights=np.arange(4.0).reshape(2, 2, 1))
        assert grid.weights_2d().reshape(-1).tolist() == [0.0, 1.0, 2.0, 3.0]


class TestFeatureDataset:
    def test_empty_rejected(self):
        with pytest.raises(InputError):
            FeatureDataset(dim=2, vectors=np.empty((0, 2)))

    def test_dim_mismatch_rejected(self):
        with pytest.raises(InputError):
            FeatureDataset(dim=3, vectors=np.zeros((4, 2)))

    def test_non_finite_rejected(self):
        with pytest.raises(InputError):
            FeatureDataset(dim=1, vectors=np.array([[np.inf]]))

    def test_from_array_infers_dim(self):
        ds = FeatureDataset.from_array([[0.1, 0.2], [0.3, 0.4]])
        assert ds.dim == 2 and ds.n == 2

    def test_vectors_read_only(self):
        ds = FeatureDataset.from_array([[0.5]])
        with pytest.raises(ValueError):
            ds.vectors[0, 0] = 0.0


class TestFindBmu:
    def test_two_cell_hand_case(self, kernel_backend):
        cfg = SomConfig(dim=1, rows=1, cols=2, seed=0)
        grid = SomGrid(config=cfg, weights=np.array([[[0.0], [1.0]]]))
        result = find_bmu(grid, [0.9])
        assert (result.row, result.col) == (0, 1)
        assert result.distance == pytest.approx(0.1, rel=1e-12)

    def test_exact_match_gives_zero_distance(self, kernel_backend):
        grid = init_grid(SomConfig(dim=4, seed=3))
        target = grid.weights[2, 1]
        result = find_bmu(grid, target)
        assert (result.row, result.col) == (2, 1)
        assert result.distance == 0.0

    def test_tie_goes_to_lowest_row_major_index(self, kernel_backend):
        cfg = SomConfig(dim=1, rows=2, cols=2, seed=0)
        grid = SomGrid(config=cfg, weights=np.full((2, 2, 1), 0.5))
        result = find_bmu(grid, [0.7])
        assert (result.row, result.col) == (0, 0)

    def test_dimension_mismatch_rejected(self):
        grid = init_grid(SomConfig(dim=3))
        with pytest.raises(InputError):
            find_bmu(grid, [0.1, 0.2])

    def test_matches_exhaustive_scan(self, kernel_backend):
        rng = np.random.default_rng(11)
        for _ in range(200):
            rows = int(rng.integers(1, 5))
            cols = int(rng.integers(1, 5))
            dim = int(rng.integers(1, 17))
            cfg = SomConfig(dim=dim, rows=rows, cols=cols, seed=int(rng.integers(0, 1000)))
            grid = init_grid(cfg)
            vector = rng.random(dim)
            got = find_bmu(grid, vector)
            want_idx, want_dist = brute_force_bmu(grid.weights_2d(), vector)
            assert got.row * cols + got.col == want_idx
            assert got.distance == pytest.approx(want_dist, rel=1e-12)


class TestNeighborhoodFactor:
    def test_zero_distance_is_one(self):
        assert neighborhood_factor(0.0, 1.2) == 1.0

    def test_distance_equal_radius(self):
        assert neighborhood_factor(2.5, 2.5) == pytest.approx(math.exp(-0.5), rel=1e-15)

    def test_hand_value(self):
        assert neighborhood_factor(3.0, 1.2) == pytest.approx(math.exp(-(9 / 2.88)), rel=1e-15)
        assert neighborhood_factor(3.0, 1.2) == pytest.approx(0.04394, abs=5e-6)

    def test_strictly_decreasing_in_distance(self):
        values = [neighborhood_factor(d / 4, 1.2) for d in range(12)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_invalid_inputs(self):
        with pytest.raises(ConfigError):
            neighborhood_factor(1.0, 0.0)
        with pytest.raises(InputError):
            neighborhood_factor(-1.0, 1.0)


class TestDecayAt:
    def test_start_is_initial(self):
        assert decay_at(0.2, 0, 10000) == 0.2

    def test_end_is_initial_over_e(self):
        assert decay_at(0.2, 10000, 10000) == pytest.approx(0.2 / math.e, rel=1e-15)
        assert decay_at(0.2, 10000, 10000) == pytest.approx(0.07358, abs=5e-6)

    def test_halfway(self):
        assert decay_at(1.2, 5000, 10000) == pytest.approx(1.2 * math.exp(-0.5), rel=1e-15)
        assert decay_at(1.2, 5000, 10000) == pytest.approx(0.72784, abs=5e-6)

    def test_strictly_decreasing(self):
        values = [decay_at(1.0, t, 100) for t in range(0, 101, 10)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_invalid_inputs(self):
        with pytest.raises(ConfigError):
            decay_at(1.0, 0, 0)
        with pytest.raises(InputError):
            decay_at(1.0, 11, 10)


class TestTrain:
    def test_zero_iterations_is_identity(self, kernel_backend):
        cfg = SomConfig(dim=3, iterations=0, seed=5)
        grid = init_grid(cfg)
        data = FeatureDataset.from_array(np.random.default_rng(1).random((10, 3)))
        trained = train(grid, data)
        assert np.array_equal(trained.weights, grid.weights)

    def test_deterministic(self, kernel_backend):
        cfg = SomConfig(dim=4, iterations=500, seed=9)
        data = FeatureDataset.from_array(np.random.default_rng(2).random((30, 4)))
        a = train(init_grid(cfg), data)
        b = train(init_grid(cfg), data)
        assert np.array_equal(a.weights, b.weights)

    def test_dimension_mismatch_rejected(self):
        grid = init_grid(SomConfig(dim=3))
        with pytest.raises(InputError):
            train(grid, FeatureDataset.from_array(np.zeros((5, 2))))

    def test_matches_pure_python_reimplementation(self, kernel_backend):
        # 2500 steps straddles kernel-call chunk boundaries
        cfg = SomConfig(dim=2, rows=3, cols=2, iterations=2500, seed=13)
        vectors = np.random.default_rng(4).random((40, 2))
        data = FeatureDataset.from_array(vectors)
        trained = train(init_grid(cfg), data)
        expected = train_oracle(cfg, vectors.tolist())
        assert np.array_equal(trained.weights, expected)

    def test_grid_without_generator_trains_identically(self, kernel_backend):
        cfg = SomConfig(dim=3, iterations=400, seed=21)
        data = FeatureDataset.from_array(np.random.default_rng(5).random((25, 3)))
        seeded = init_grid(cfg)
        bare = SomGrid(config=cfg, weights=seeded.weights)
        assert np.array_equal(train(seeded, data).weights, train(bare, data).weights)

    def test_single_vector_converges_to_it(self, kernel_backend):
        cfg = SomConfig(dim=4, seed=0)
        v = np.array([0.3, 0.7, 0.1, 0.9])
        data = FeatureDataset.from_array(np.tile(v, (3, 1)))
        trained = train(init_grid(cfg), data)
        assert find_bmu(trained, v).distance < 0.01

    def test_single_vector_contraction_is_monotone(self, kernel_backend):
        # distance from the nearest weight to the lone input never grows,
        # checkpointed every 100 steps of one continuous run
        from somqe.som import _grid_sq_distances, _neighborhood_table, decay_at as _decay

        cfg = SomConfig(dim=3, iterations=1000, seed=2)
        v = np.array([0.25, 0.5, 0.75])
        data = np.tile(v, (2, 1))
        rng = np.random.default_rng(cfg.seed)
        weights = rng.random((cfg.rows, cfg.cols, cfg.dim)).reshape(-1, cfg.dim)
        indices = rng.integers(0, 2, size=cfg.iterations).astype(np.intp)
        alphas = np.array(
            [_decay(cfg.initial_learning_rate, t, cfg.iterations) for t in range(cfg.iterations)]
        )
        sigmas = [_decay(cfg.initial_radius, t, cfg.iterations) for t in range(cfg.iterations)]
        gd2 = _grid_sq_distances(cfg.rows, cfg.cols)
        kern = backend.kernels()
        distances = []
        for start in range(0, cfg.iterations, 100):
            stop = start + 100
            htable = _neighborhood_table(sigmas[start:stop], int(gd2.max()))
            kern.train_chunk(weights, data, indices[start:stop], alphas[start:stop], htable, gd2)
            distances.append(math.sqrt(((weights - v) ** 2).sum(axis=1).min()))
        assert all(b <= a for a, b in zip(distances, distances[1:]))


class TestQuantizationError:
    def test_exact_coverage_is_zero(self, kernel_backend):
        grid = init_grid(SomConfig(dim=3, seed=1))
        data = FeatureDataset(dim=3, vectors=grid.weights_2d()[[0, 5, 9]])
        assert quantization_error(grid, data) == 0.0

    def test_two_cell_hand_case(self, kernel_backend):
        cfg = SomConfig(dim=1, rows=1, cols=2, seed=0)
        grid = SomGrid(config=cfg, weights=np.array([[[0.0], [1.0]]]))
        data = FeatureDataset.from_array([[0.1], [0.9]])
        assert quantization_error(grid, data) == pytest.approx(0.1, rel=1e-12)

    def test_dimension_mismatch_rejected(self):
        grid = init_grid(SomConfig(dim=3))
        with pytest.raises(InputError):
            quantization_error(grid, FeatureDataset.from_array(np.zeros((5, 2))))

    def test_matches_exhaustive_computation(self, kernel_backend):
        rng = np.random.default_rng(6)
        grid = init_grid(SomConfig(dim=16, seed=40))
        data = FeatureDataset.from_array(rng.random((100, 16)))
        got = quantization_error(grid, data)
        want = brute_force_qe(grid.weights_2d(), data.vectors)
        assert got == pytest.approx(want, rel=1e-12)

    def test_backends_agree_bit_for_bit(self):
        rng = np.random.default_rng(8)
        cfg = SomConfig(dim=6, iterations=1500, seed=3)
        data = FeatureDataset.from_array(rng.random((80, 6)))
        values = {}
        weights = {}
        for name in backend.available_backends():
            backend.set_backend(name)
            grid = train(init_grid(cfg), data)
            weights[name] = grid.weights
            values[name] = quantization_error(grid, data)
        if len(values) < 2:
            pytest.skip("only one backend built")
        assert np.array_equal(weights["cython"], weights["python"])
        assert values["cython"] == values["python"]

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), shift=st.integers(1, 50))
    def test_permutation_invariance(self, seed, shift):
        rng = np.random.default_rng(seed)
        grid = init_grid(SomConfig(dim=4, seed=seed % 100))
        vectors = rng.random((60, 4))
        base = quantization_error(grid, FeatureDataset.from_array(vectors))
        rolled = quantization_error(grid, FeatureDataset.from_array(np.roll(vectors, shift, axis=0)))
        assert rolled == pytest.approx(base, rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), c=st.sampled_from([0.5, 2.0]))
    def test_homogeneity_under_scaling(self, seed, c):
        rng = np.random.default_rng(seed)
        cfg = SomConfig(dim=5, rows=3, cols=3, seed=seed % 97)
        grid = init_grid(cfg)
        vectors = rng.random((40, 5))
        base = quantization_error(grid, FeatureDataset.from_array(vectors))
        scaled_grid = SomGrid(config=cfg, weights=grid.weights * c)
        scaled = quantization_error(scaled_grid, FeatureDataset.from_array(vectors * c))
        assert scaled == pytest.approx(c * base, rel=1e-12)
