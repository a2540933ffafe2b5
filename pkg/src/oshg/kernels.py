"""Baseline adapter kernels for ablation runs.

Four interchangeable kernels map an (n, d) feature matrix to an (n, d)
adapted matrix, so any of them can sit in the text-fusion slot:

  avg_pool        element-wise mean of each vertex with its k nearest
                  cosine neighbors (no parameters)
  max_pool        element-wise max over the same neighbor set
  pairwise_graph  D^-1/2 A D^-1/2 F Theta over the binary symmetrized
                  KNN graph (linear, Theta trainable)
  hypergraph      sigma(Delta F Theta) over KNN hyperedges, the full
                  adapter; with singleton edges it collapses to
                  sigma(F Theta)

knn_k = 0 means "self only": pooling becomes the identity, the pairwise
graph has no edges (zero-degree rows normalize to zero), and the
hypergraph degenerates to singleton edges.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError
from .hgconv import ConvLayer, conv_forward
from .hypergraph import TAG_ORIGINAL, Hypergraph, knn_hyperedges, knn_indices
from .matrix import as_matrix

__all__ = [
    "KERNELS",
    "knn_adjacency",
    "normalized_adjacency",
    "pool_neighbors",
    "singleton_hypergraph",
    "baseline_adapt",
]

KERNELS = ("avg_pool", "max_pool", "pairwise_graph", "hypergraph")

POOL_MODES = ("mean", "max")


def knn_adjacency(features: np.ndarray, k: int) -> np.ndarray:
    """Binary symmetric adjacency of the KNN graph, zero diagonal.

    Vertices i and j are adjacent when either appears among the other's
    top-k cosine neighbors.  k = 0 gives the empty graph.
    """
    f = as_matrix(features, "features")
    n = f.shape[0]
    if k == 0:
        return np.zeros((n, n), dtype=np.float64)
    nbrs = knn_indices(f, k)
    adj = np.zeros((n, n), dtype=np.float64)
    rows = np.repeat(np.arange(n), k)
    adj[rows, nbrs.reshape(-1)] = 1.0
    return np.maximum(adj, adj.T)


def normalized_adjacency(adj: np.ndarray) -> np.ndarray:
    """D^-1/2 A D^-1/2 with the 0^-1/2 = 0 convention for isolated rows."""
    a = as_matrix(adj, "adjacency")
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0.0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def pool_neighbors(features: np.ndarray, k: int, mode: str) -> np.ndarray:
    """Pool each row with its k nearest cosine neighbors (self included)."""
    if mode not in POOL_MODES:
        raise ConfigError(f"unknown pool mode {mode!r}; choose from {POOL_MODES}")
    f = as_matrix(features, "features")
    if k == 0:
        return f.copy()
    nbrs = knn_indices(f, k)
    n = f.shape[0]
    groups = np.concatenate([np.arange(n)[:, None], nbrs], axis=1)
    gathered = f[groups]
    return gathered.mean(axis=1) if mode == "mean" else gathered.max(axis=1)


def singleton_hypergraph(n: int) -> Hypergraph:
    """One unit-weight edge {i} per vertex; its propagation is the identity."""
    if n < 1:
        raise ShapeError(f"need at least 1 vertex, got {n}")
    return Hypergraph(
        n_vertices=n,
        edges=tuple((i,) for i in range(n)),
        weights=np.ones(n, dtype=np.float64),
        block_tags=(TAG_ORIGINAL,) * n,
    )


def baseline_adapt(kind: str, f: np.ndarray, knn_k: int,
                   theta: np.ndarray | None = None,
                   activation: str = "relu") -> np.ndarray:
    """Apply one adapter kernel; the output shape always matches ``f``.

    ``theta`` defaults to the identity and must be square d x d.  The
    pooling kernels ignore it; the pairwise kernel applies it linearly;
    the hypergraph kernel applies it inside ``activation``.
    """
    if kind not in KERNELS:
        raise ConfigError(f"unknown kernel {kind!r}; choose from {KERNELS}")
    feats = as_matrix(f, "features")
    d = feats.shape[1]
    if theta is not None:
        theta = as_matrix(theta, "theta")
        if theta.shape != (d, d):
            raise ShapeError(
                f"theta must be {d}x{d} to preserve the feature shape, "
                f"got {theta.shape}"
            )
    if knn_k < 0:
        raise ShapeError(f"knn_k must be >= 0, got {knn_k}")
    if kind == "avg_pool":
        return pool_neighbors(feats, knn_k, "mean")
    if kind == "max_pool":
        return pool_neighbors(feats, knn_k, "max")
    if kind == "pairwise_graph":
        out = normalized_adjacency(knn_adjacency(feats, knn_k)) @ feats
        return out if theta is None else out @ theta
    hg = (singleton_hypergraph(feats.shape[0]) if knn_k == 0
          else knn_hyperedges(feats, knn_k))
    layer = ConvLayer(np.eye(d) if theta is None else theta, activation)
    return conv_forward(hg, [layer], feats)
