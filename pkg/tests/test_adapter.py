"""Tests for psi projection, residual fusion, and checkpoints."""

import numpy as np
import pytest

from oshg.adapter import (
    TextAdapter,
    VisionAdapter,
    fuse_text,
    fuse_vision,
    load_checkpoint,
    project_psi,
    save_checkpoint,
)
from oshg.dataio import build_bundle
from oshg.errors import ConfigError, ShapeError
from oshg.hgconv import ConvLayer, near_identity_init
from oshg.hypergraph import Hypergraph, knn_hyperedges
from oshg.matrix import Rng


def singleton_hg(n):
    return Hypergraph(n, tuple((i,) for i in range(n)), np.ones(n),
                      tuple(["original"] * n))


def identity_text_adapter(n, b, c, **kw):
    """Adapter whose conv path is an exact identity map."""
    hg = singleton_hg(n)
    return TextAdapter(hg, [ConvLayer(np.eye(b + c), "identity")], b=b, c=c, **kw)


class TestProjectPsi:
    def test_recovers_base_before_conv(self):
        """psi of a fused bundle returns the base block bit-exactly."""
        rng = np.random.default_rng(0)
        base = rng.standard_normal(5)
        bundle = build_bundle(base, [rng.standard_normal(3)], l=2, c=3)
        f = bundle.fused[None, :]
        assert np.array_equal(project_psi(f, 5)[0], base)

    def test_full_width_identity(self):
        rng = np.random.default_rng(1)
        f = rng.standard_normal((4, 6))
        assert np.array_equal(project_psi(f, 6), f)

    def test_matches_selector_matmul(self):
        """Slice equals explicit product with the (d x b) selector."""
        rng = np.random.default_rng(2)
        f = rng.standard_normal((3, 7))
        A = np.zeros((7, 4))
        A[:4, :4] = np.eye(4)
        np.testing.assert_array_equal(project_psi(f, 4), f @ A)

    def test_too_wide(self):
        with pytest.raises(ShapeError):
            project_psi(np.zeros((2, 3)), 4)

    def test_returns_copy(self):
        f = np.ones((2, 3))
        out = project_psi(f, 2)
        out[0, 0] = 99.0
        assert f[0, 0] == 1.0


class TestFuseText:
    def test_alpha_one_returns_dataset(self):
        """alpha = 1 reproduces t_dataset exactly."""
        rng = np.random.default_rng(3)
        ad = identity_text_adapter(4, b=3, c=2)
        t = rng.standard_normal((4, 3))
        f = rng.standard_normal((4, 5))
        assert np.array_equal(fuse_text(ad, t, f, alpha=1.0), t)

    def test_alpha_zero_pure_graph_path(self):
        rng = np.random.default_rng(4)
        ad = identity_text_adapter(4, b=3, c=2)
        t = rng.standard_normal((4, 3))
        f = rng.standard_normal((4, 5))
        np.testing.assert_array_equal(fuse_text(ad, t, f, alpha=0.0), f[:, :3])

    def test_identity_path_fixed_point(self):
        """With an identity conv and t as the base block, any alpha
        returns t: 0.8 t + 0.2 t = t."""
        rng = np.random.default_rng(5)
        t = rng.standard_normal((4, 3))
        f = np.concatenate([t, rng.standard_normal((4, 2))], axis=1)
        ad = identity_text_adapter(4, b=3, c=2)
        np.testing.assert_allclose(fuse_text(ad, t, f, alpha=0.2), t, atol=1e-15)

    def test_affine_three_point_collinearity(self):
        """output(a) lies on the segment between output(0) and output(1)."""
        rng = np.random.default_rng(6)
        f0 = rng.standard_normal((6, 7))
        hg = knn_hyperedges(f0, 2)
        layers = [ConvLayer(near_identity_init(Rng(1), 7), "relu")]
        ad = TextAdapter(hg, layers, b=4, c=3)
        t = rng.standard_normal((6, 4))
        lo = fuse_text(ad, t, f0, alpha=0.0)
        hi = fuse_text(ad, t, f0, alpha=1.0)
        for a in (0.2, 0.5, 0.9):
            mid = fuse_text(ad, t, f0, alpha=a)
            assert np.abs(mid - ((1 - a) * lo + a * hi)).max() <= 1e-12

    def test_output_shape_n_by_b(self):
        rng = np.random.default_rng(7)
        f0 = rng.standard_normal((5, 9))
        hg = knn_hyperedges(f0, 2)
        ad = TextAdapter(hg, [ConvLayer(near_identity_init(Rng(2), 9))], b=2, c=7)
        out = fuse_text(ad, rng.standard_normal((5, 2)), f0)
        assert out.shape == (5, 2)

    def test_alpha_out_of_range(self):
        ad = identity_text_adapter(2, b=1, c=1)
        with pytest.raises(ConfigError):
            fuse_text(ad, np.zeros((2, 1)), np.zeros((2, 2)), alpha=1.5)
        with pytest.raises(ConfigError):
            fuse_text(ad, np.zeros((2, 1)), np.zeros((2, 2)), alpha=-0.1)

    def test_shape_mismatch(self):
        ad = identity_text_adapter(2, b=1, c=1)
        with pytest.raises(ShapeError):
            fuse_text(ad, np.zeros((2, 2)), np.zeros((2, 2)), alpha=0.5)

    def test_alpha_mode_validation(self):
        with pytest.raises(ConfigError):
            identity_text_adapter(2, b=1, c=1, alpha_mode="magic")

    def test_layer_dim_must_match_fused(self):
        hg = singleton_hg(2)
        with pytest.raises(ShapeError):
            TextAdapter(hg, [ConvLayer(np.eye(3))], b=1, c=1)


class TestFuseVision:
    def test_beta_zero_noop(self):
        """beta = 0 returns the input bit for bit."""
        rng = np.random.default_rng(8)
        v = rng.standard_normal((5, 4))
        hg = knn_hyperedges(v, 2)
        ad = VisionAdapter(hg, [ConvLayer(near_identity_init(Rng(3), 4))], beta=0.0)
        assert np.array_equal(fuse_vision(ad, v), v)

    def test_beta_one_identity_path(self):
        """beta = 1 with singleton edges and theta = I returns the input."""
        v = np.random.default_rng(9).standard_normal((4, 3))
        ad = VisionAdapter(singleton_hg(4),
                           [ConvLayer(np.eye(3), "identity")], beta=1.0)
        np.testing.assert_allclose(fuse_vision(ad, v), v, atol=1e-15)

    def test_half_beta_hand_case(self):
        """2-vertex instance matches the hand-computed convex mix."""
        v = np.array([[1.0, 0.0], [0.0, 1.0]])
        hg = Hypergraph(2, ((0, 1), (0, 1)), np.ones(2), ("original",) * 2)
        ad = VisionAdapter(hg, [ConvLayer(np.eye(2), "identity")], beta=0.5)
        # delta: d_v = [2,2], d_e = [2,2], two unit-weight edges.
        # S = H / sqrt(2); delta = S diag(1/2, 1/2) S^T = ones(2,2) / 2.
        step = np.full((2, 2), 0.5) @ v
        want = 0.5 * step + 0.5 * v
        np.testing.assert_allclose(fuse_vision(ad, v), want, atol=1e-12)

    def test_beta_range(self):
        with pytest.raises(ConfigError):
            VisionAdapter(singleton_hg(2), [], beta=1.2)

    def test_square_layers_required(self):
        with pytest.raises(ShapeError):
            VisionAdapter(singleton_hg(2), [ConvLayer(np.zeros((2, 3)))], beta=0.5)

    def test_dim_mismatch(self):
        ad = VisionAdapter(singleton_hg(2), [ConvLayer(np.eye(3))], beta=0.5)
        with pytest.raises(ShapeError):
            fuse_vision(ad, np.zeros((2, 2)))


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(10)
        manifest = {"b": 4, "c": 2, "l": 3, "alpha": 0.2, "seed": 7}
        blobs = {
            "theta_text_0": rng.standard_normal((6, 6)),
            "weights_text": rng.uniform(0.5, 2.0, size=9),
        }
        d = tmp_path / "ckpt"
        save_checkpoint(d, manifest, blobs)
        m2, b2 = load_checkpoint(d)
        assert m2["b"] == 4 and m2["alpha"] == 0.2
        assert sorted(b2) == ["theta_text_0", "weights_text"]
        assert np.array_equal(b2["theta_text_0"], blobs["theta_text_0"])
        assert np.array_equal(b2["weights_text"][0], blobs["weights_text"])

    def test_deterministic_bytes(self, tmp_path):
        """Saving the same state twice yields byte-identical files."""
        rng = np.random.default_rng(11)
        manifest = {"alpha": 1 / 3, "dims": [4, 4]}
        blobs = {"theta": rng.standard_normal((4, 4))}
        d1, d2 = tmp_path / "a", tmp_path / "b"
        save_checkpoint(d1, manifest, blobs)
        save_checkpoint(d2, manifest, blobs)
        for name in ("manifest.json", "theta.emb"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_missing_manifest(self, tmp_path):
        from oshg.errors import DataError

        with pytest.raises(DataError):
            load_checkpoint(tmp_path)
