"""Tests for hypergraph construction, degrees, and incidence handling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oshg.errors import ShapeError
from oshg.hypergraph import (
    Hypergraph,
    auto_k,
    concat_incidence,
    degrees,
    incidence_csr,
    incidence_dense,
    knn_hyperedges,
    knn_indices,
    load_hypergraph_json,
    save_hypergraph_json,
    tag_synonym,
)


def make_hg(n, edges):
    edges = tuple(tuple(e) for e in edges)
    return Hypergraph(
        n_vertices=n,
        edges=edges,
        weights=np.ones(len(edges)),
        block_tags=tuple(["original"] * len(edges)),
    )


class TestAutoK:
    def test_equal_dims(self):
        """b=64, c=64, n=1000 gives k = max(b, c) = 64."""
        assert auto_k(64, 64, 1000) == 64

    def test_max_rule(self):
        assert auto_k(64, 128, 1000) == 128

    def test_clamped_to_n_minus_1(self):
        assert auto_k(64, 128, 50) == 49

    def test_too_few_vertices(self):
        with pytest.raises(ShapeError):
            auto_k(4, 4, 1)


class TestDegrees:
    def test_hand_sum(self):
        """Edges {0,1},{0,2} over 3 vertices: d_v=[2,1,1], d_e=[2,2]."""
        hg = make_hg(3, [(0, 1), (0, 2)])
        np.testing.assert_array_equal(hg.d_v, [2, 1, 1])
        np.testing.assert_array_equal(hg.d_e, [2, 2])

    def test_empty_edge_set(self):
        hg = Hypergraph(3, (), np.zeros(0), ())
        assert not hg.d_v.any()
        assert hg.d_e.shape == (0,)

    def test_singleton_identity(self):
        """Singleton edges {i} give d_v = d_e = all ones."""
        hg = make_hg(4, [(i,) for i in range(4)])
        np.testing.assert_array_equal(hg.d_v, np.ones(4))
        np.testing.assert_array_equal(hg.d_e, np.ones(4))

    def test_incidence_count_identity(self):
        """Sum of vertex degrees equals sum of edge degrees."""
        rng = np.random.default_rng(0)
        for _ in range(10):
            n = int(rng.integers(2, 12))
            edges = []
            for _ in range(int(rng.integers(1, 8))):
                size = int(rng.integers(1, n + 1))
                edges.append(tuple(rng.choice(n, size=size, replace=False).tolist()))
            hg = make_hg(n, edges)
            assert hg.d_v.sum() == hg.d_e.sum()


class TestKnn:
    def test_two_vertices(self):
        """n=2, k=1: both edges are {0,1} and all degrees are 2."""
        hg = knn_hyperedges(np.array([[1.0, 0.0], [0.0, 1.0]]), k=1)
        assert hg.edges == ((0, 1), (0, 1))
        np.testing.assert_array_equal(hg.d_v, [2, 2])
        np.testing.assert_array_equal(hg.d_e, [2, 2])

    def test_identical_rows_tie_break(self):
        """All-equal features: neighbors are the lowest other indices."""
        f = np.ones((5, 3))
        nbrs = knn_indices(f, 2)
        np.testing.assert_array_equal(nbrs[0], [1, 2])
        np.testing.assert_array_equal(nbrs[3], [0, 1])
        np.testing.assert_array_equal(nbrs[4], [0, 1])

    def test_cardinality_k_plus_1(self):
        rng = np.random.default_rng(1)
        f = rng.standard_normal((9, 4))
        for k in (1, 3, 8):
            hg = knn_hyperedges(f, k)
            assert all(len(e) == k + 1 for e in hg.edges)

    def test_self_membership(self):
        rng = np.random.default_rng(2)
        hg = knn_hyperedges(rng.standard_normal((7, 3)), 2)
        for i, e in enumerate(hg.edges):
            assert i in e

    def test_scale_invariance(self):
        """Cosine neighborhoods ignore global feature scaling."""
        rng = np.random.default_rng(3)
        f = rng.standard_normal((10, 5))
        assert knn_hyperedges(f, 3).edges == knn_hyperedges(3.0 * f, 3).edges

    def test_nearest_by_cosine(self):
        f = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [-1.0, 0.0]])
        nbrs = knn_indices(f, 1)
        assert nbrs[0, 0] == 1
        assert nbrs[1, 0] == 0
        assert nbrs[3, 0] == 2

    def test_k_out_of_range(self):
        f = np.eye(3)
        with pytest.raises(ShapeError):
            knn_hyperedges(f, 0)
        with pytest.raises(ShapeError):
            knn_hyperedges(f, 3)

    def test_weights_start_at_one(self):
        hg = knn_hyperedges(np.eye(4), 1)
        np.testing.assert_array_equal(hg.weights, np.ones(4))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32), st.integers(2, 10), st.integers(1, 4))
    def test_edge_count_equals_vertex_count(self, seed, n, kraw):
        rng = np.random.default_rng(seed)
        k = min(kraw, n - 1)
        hg = knn_hyperedges(rng.standard_normal((n, 3)), k)
        assert hg.n_edges == n
        assert hg.d_v.sum() == hg.d_e.sum()


class TestConcat:
    def test_single_part_identity(self):
        hg = make_hg(3, [(0, 1), (1, 2)])
        cat = concat_incidence([hg])
        assert cat.edges == hg.edges
        np.testing.assert_array_equal(cat.weights, hg.weights)
        assert cat.block_tags == hg.block_tags

    def test_edge_count_sums(self):
        """3-edge original plus two 3-edge synonym parts gives 9 edges."""
        rng = np.random.default_rng(4)
        f = rng.standard_normal((3, 4))
        ori = knn_hyperedges(f, 1)
        syn1 = knn_hyperedges(rng.standard_normal((3, 4)), 1, tag=tag_synonym(1))
        syn2 = knn_hyperedges(rng.standard_normal((3, 4)), 1, tag=tag_synonym(2))
        cat = concat_incidence([ori, syn1, syn2])
        assert cat.n_edges == 9
        assert cat.block_tags[:3] == ("original",) * 3
        assert cat.block_tags[3:6] == (tag_synonym(1),) * 3
        assert cat.block_tags[6:] == (tag_synonym(2),) * 3

    def test_dv_additivity(self):
        """Vertex degrees of the concat are the sum of per-part degrees."""
        rng = np.random.default_rng(5)
        parts = [knn_hyperedges(rng.standard_normal((6, 3)), 2) for _ in range(3)]
        cat = concat_incidence(parts)
        np.testing.assert_array_equal(cat.d_v, sum(p.d_v for p in parts))

    def test_block_order_preserved(self):
        a = make_hg(2, [(0,), (1,)])
        b = make_hg(2, [(0, 1)])
        cat = concat_incidence([a, b])
        assert cat.edges == ((0,), (1,), (0, 1))

    def test_vertex_count_mismatch(self):
        with pytest.raises(ShapeError):
            concat_incidence([make_hg(2, [(0,)]), make_hg(3, [(0,)])])

    def test_empty_list(self):
        with pytest.raises(ShapeError):
            concat_incidence([])


class TestIncidenceMatrices:
    def test_dense_hand_case(self):
        hg = make_hg(3, [(0, 1), (0, 2)])
        H = incidence_dense(hg)
        np.testing.assert_array_equal(H, [[1, 1], [1, 0], [0, 1]])

    def test_sparse_matches_dense(self):
        rng = np.random.default_rng(6)
        hg = knn_hyperedges(rng.standard_normal((15, 4)), 4)
        np.testing.assert_array_equal(
            incidence_csr(hg).toarray(), incidence_dense(hg)
        )

    def test_degrees_are_incidence_sums(self):
        rng = np.random.default_rng(7)
        hg = knn_hyperedges(rng.standard_normal((10, 3)), 3)
        H = incidence_dense(hg)
        np.testing.assert_array_equal(hg.d_v, H.sum(axis=1))
        np.testing.assert_array_equal(hg.d_e, H.sum(axis=0))


class TestValidation:
    def test_vertex_id_out_of_range(self):
        with pytest.raises(ShapeError):
            make_hg(2, [(0, 2)])

    def test_nonpositive_weight(self):
        with pytest.raises(ShapeError):
            Hypergraph(2, ((0,),), np.array([0.0]), ("original",))

    def test_weight_count_mismatch(self):
        with pytest.raises(ShapeError):
            Hypergraph(2, ((0,), (1,)), np.array([1.0]), ("original", "original"))


class TestJsonRoundTrip:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        hg = knn_hyperedges(rng.standard_normal((6, 3)), 2)
        hg.weights[:] = rng.uniform(0.5, 2.0, size=hg.n_edges)
        hg2 = Hypergraph(hg.n_vertices, hg.edges, hg.weights, hg.block_tags)
        p = tmp_path / "hg.json"
        save_hypergraph_json(p, hg2)
        back = load_hypergraph_json(p)
        assert back.n_vertices == hg2.n_vertices
        assert back.edges == hg2.edges
        assert np.array_equal(back.weights, hg2.weights)
        assert back.block_tags == hg2.block_tags
