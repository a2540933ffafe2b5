"""Tests for the baseline adapter kernels and their training drop-in."""

import numpy as np
import pytest

from oshg.adapter import load_checkpoint
from oshg.errors import ConfigError, ShapeError
from oshg.hgconv import propagation_matrix, relu
from oshg.hypergraph import knn_indices
from oshg.kernels import (
    KERNELS,
    baseline_adapt,
    knn_adjacency,
    normalized_adjacency,
    pool_neighbors,
    singleton_hypergraph,
)
from oshg.training import Model, TrainConfig, finite_diff_check, load_model, train

from test_training import random_corpus


def path_features():
    """Three unit vectors whose symmetrized 1-NN graph is the path 0-1-2."""
    angles = np.deg2rad([0.0, 10.0, 25.0])
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


# ----------------------------------------------------------- construction

class TestKnnAdjacency:
    def test_zero_k_empty_graph(self):
        rng = np.random.default_rng(0)
        f = rng.standard_normal((5, 3))
        assert np.array_equal(knn_adjacency(f, 0), np.zeros((5, 5)))

    def test_symmetric_binary_zero_diagonal(self):
        rng = np.random.default_rng(1)
        f = rng.standard_normal((12, 4))
        a = knn_adjacency(f, 3)
        assert np.array_equal(a, a.T)
        assert set(np.unique(a)) <= {0.0, 1.0}
        assert np.all(np.diag(a) == 0.0)

    def test_union_of_directed_knn(self):
        rng = np.random.default_rng(2)
        f = rng.standard_normal((9, 3))
        k = 2
        nbrs = knn_indices(f, k)
        a = knn_adjacency(f, k)
        for i in range(9):
            for j in range(9):
                expect = (j in nbrs[i]) or (i in nbrs[j])
                assert bool(a[i, j]) == expect

    def test_path_graph_from_angles(self):
        a = knn_adjacency(path_features(), 1)
        expect = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        assert np.array_equal(a, expect)


class TestNormalizedAdjacency:
    def test_hand_oracle_path(self):
        a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        got = normalized_adjacency(a)
        r = 1.0 / np.sqrt(2.0)
        expect = np.array([[0, r, 0], [r, 0, r], [0, r, 0]])
        assert np.max(np.abs(got - expect)) <= 1e-15

    def test_isolated_row_stays_zero(self):
        a = np.zeros((3, 3))
        a[0, 1] = a[1, 0] = 1.0
        got = normalized_adjacency(a)
        assert np.all(got[2] == 0.0) and np.all(got[:, 2] == 0.0)

    def test_rejects_non_square(self):
        with pytest.raises(ShapeError):
            normalized_adjacency(np.ones((2, 3)))


class TestSingletonHypergraph:
    def test_propagation_is_identity(self):
        hg = singleton_hypergraph(6)
        assert all(len(e) == 1 for e in hg.edges)
        delta = propagation_matrix(hg)
        assert np.max(np.abs(delta - np.eye(6))) <= 1e-12

    def test_rejects_empty(self):
        with pytest.raises(ShapeError):
            singleton_hypergraph(0)


# ----------------------------------------------------------------- pooling

class TestPooling:
    def test_avg_k0_is_identity(self):
        rng = np.random.default_rng(3)
        f = rng.standard_normal((7, 4))
        out = baseline_adapt("avg_pool", f, 0)
        assert np.array_equal(out, f)
        assert out is not f

    def test_max_k0_is_identity(self):
        rng = np.random.default_rng(4)
        f = rng.standard_normal((7, 4))
        assert np.array_equal(baseline_adapt("max_pool", f, 0), f)

    def test_max_identical_rows_is_identity(self):
        f = np.tile(np.array([0.5, 1.5, 0.25]), (6, 1))
        for k in (1, 2, 5):
            assert np.array_equal(baseline_adapt("max_pool", f, k), f)

    def test_avg_matches_naive_loop(self):
        rng = np.random.default_rng(5)
        f = rng.standard_normal((10, 3))
        k = 3
        nbrs = knn_indices(f, k)
        got = baseline_adapt("avg_pool", f, k)
        for i in range(10):
            group = np.vstack([f[i], f[nbrs[i]]])
            assert np.max(np.abs(got[i] - group.mean(axis=0))) <= 1e-12

    def test_max_matches_naive_loop(self):
        rng = np.random.default_rng(6)
        f = rng.standard_normal((10, 3))
        k = 2
        nbrs = knn_indices(f, k)
        got = baseline_adapt("max_pool", f, k)
        for i in range(10):
            group = np.vstack([f[i], f[nbrs[i]]])
            assert np.array_equal(got[i], group.max(axis=0))

    def test_rejects_bad_mode_and_negative_k(self):
        f = np.eye(3)
        with pytest.raises(ConfigError):
            pool_neighbors(f, 1, "median")
        with pytest.raises(ShapeError):
            baseline_adapt("avg_pool", f, -1)


# ----------------------------------------------------------- pairwise graph

class TestPairwiseGraph:
    def test_three_node_path_hand_oracle(self):
        f = path_features()
        r = 1.0 / np.sqrt(2.0)
        ahat = np.array([[0, r, 0], [r, 0, r], [0, r, 0]])
        got = baseline_adapt("pairwise_graph", f, 1)
        assert np.max(np.abs(got - ahat @ f)) <= 1e-10

    def test_three_node_path_with_theta(self):
        f = path_features()
        rng = np.random.default_rng(7)
        theta = rng.standard_normal((2, 2))
        r = 1.0 / np.sqrt(2.0)
        ahat = np.array([[0, r, 0], [r, 0, r], [0, r, 0]])
        got = baseline_adapt("pairwise_graph", f, 1, theta=theta)
        assert np.max(np.abs(got - ahat @ f @ theta)) <= 1e-10

    def test_k0_yields_zero_rows(self):
        rng = np.random.default_rng(8)
        f = rng.standard_normal((4, 3))
        assert np.array_equal(baseline_adapt("pairwise_graph", f, 0),
                              np.zeros((4, 3)))

    def test_theta_dim_mismatch_rejected(self):
        f = np.eye(3)
        with pytest.raises(ShapeError):
            baseline_adapt("pairwise_graph", f, 1, theta=np.ones((2, 2)))


# ------------------------------------------------------- hypergraph kernel

class TestHypergraphKernel:
    def test_singleton_edges_reduce_to_activation(self):
        """With k=0 the kernel is relu(F Theta), unlike the pooling kernels
        which are the identity there."""
        rng = np.random.default_rng(9)
        f = rng.standard_normal((8, 4))
        theta = rng.standard_normal((4, 4))
        got = baseline_adapt("hypergraph", f, 0, theta=theta)
        assert np.max(np.abs(got - relu(f @ theta))) <= 1e-12
        # distinguishes it from pooling at k=0
        assert not np.allclose(got, baseline_adapt("avg_pool", f, 0))

    def test_default_theta_is_identity(self):
        rng = np.random.default_rng(10)
        f = np.abs(rng.standard_normal((6, 3)))
        got = baseline_adapt("hypergraph", f, 0)
        assert np.max(np.abs(got - f)) <= 1e-12


# ------------------------------------------------------------ shared contract

class TestSharedContract:
    @pytest.mark.parametrize("kind", KERNELS)
    def test_shape_preserved(self, kind):
        rng = np.random.default_rng(11)
        f = rng.standard_normal((9, 5))
        assert baseline_adapt(kind, f, 2).shape == (9, 5)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            baseline_adapt("transformer", np.eye(3), 1)


# --------------------------------------------------------- training drop-in

class TestKernelTraining:
    def test_config_rejects_unknown_kernel(self):
        with pytest.raises(ConfigError):
            TrainConfig(kernel="fourier")

    def test_param_blocks_per_kernel(self):
        corpus = random_corpus()
        blocks = {
            "hypergraph": {"theta_text", "theta_vision", "w_text", "w_vision"},
            "pairwise_graph": {"theta_text", "theta_vision", "w_vision"},
            "avg_pool": {"theta_vision", "w_vision"},
            "max_pool": {"theta_vision", "w_vision"},
        }
        for kernel, expect in blocks.items():
            model = Model(corpus, TrainConfig(kernel=kernel, knn_k=2))
            assert set(model.param_blocks()) == expect

    @pytest.mark.parametrize("kernel", ["avg_pool", "max_pool", "pairwise_graph"])
    def test_train_runs_with_baseline_kernel(self, kernel):
        corpus = random_corpus()
        config = TrainConfig(epochs=2, batch=6, knn_k=2, kernel=kernel)
        result = train(config, corpus)
        assert len(result.epochs) == 2
        assert all(np.isfinite(e.loss) for e in result.epochs)

    @pytest.mark.parametrize("kernel", ["pairwise_graph", "avg_pool"])
    def test_gradients_verify_for_baseline_kernels(self, kernel):
        corpus = random_corpus(seed=3)
        model = Model(corpus, TrainConfig(knn_k=2, kernel=kernel))
        report = finite_diff_check(model, np.arange(corpus.n_captions),
                                   coords_per_block=12, seed=5)
        assert report.passed
        assert all(n > 0 for n in report.checked.values())

    def test_checkpoint_round_trip_with_kernel(self, tmp_path):
        corpus = random_corpus(seed=4)
        config = TrainConfig(epochs=2, batch=6, knn_k=2, kernel="pairwise_graph")
        result = train(config, corpus, out_dir=tmp_path / "run")
        manifest, _ = load_checkpoint(tmp_path / "run")
        assert manifest["kernel"] == "pairwise_graph"
        loaded = load_model(tmp_path / "run", corpus)
        t0, v0 = result.model.embeddings()
        t1, v1 = loaded.embeddings()
        assert np.array_equal(t0, t1) and np.array_equal(v0, v1)
