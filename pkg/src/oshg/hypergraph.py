"""KNN hypergraph construction, degrees, weights, incidence concatenation.

A hypergraph over n vertices is a list of hyperedges (vertex-id sets,
stored as sorted tuples) plus one positive scalar weight per edge.  The
incidence matrix H is n x m with H[i, j] = 1 iff vertex i sits in edge
j; vertex degrees d_v are row sums of H and edge degrees d_e are column
sums.  Degrees never involve the weights, so scaling all weights leaves
the degree normalization untouched.

Construction is KNN based: edge i contains vertex i together with its k
nearest neighbors under cosine similarity, ties resolved toward the
lowest vertex index so runs are deterministic.  Graphs built from the
original captions and from each synonym slot concatenate along the edge
axis, with per-edge tags recording which block an edge came from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ShapeError
from .matrix import as_matrix, cosine_similarity_matrix

__all__ = [
    "Hypergraph",
    "auto_k",
    "knn_indices",
    "knn_hyperedges",
    "concat_incidence",
    "degrees",
    "incidence_dense",
    "incidence_csr",
    "save_hypergraph_json",
    "load_hypergraph_json",
]

TAG_ORIGINAL = "original"


def tag_synonym(i: int) -> str:
    """Block tag for the i-th synonym slot (1-based)."""
    return f"synonym({i})"


@dataclass
class Hypergraph:
    """Hyperedge list with weights, block tags, and cached degrees."""

    n_vertices: int
    edges: tuple[tuple[int, ...], ...]
    weights: np.ndarray
    block_tags: tuple[str, ...]
    d_v: np.ndarray = field(init=False)
    d_e: np.ndarray = field(init=False)

    def __post_init__(self):
        self.edges = tuple(tuple(sorted(set(int(v) for v in e))) for e in self.edges)
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        self.block_tags = tuple(self.block_tags)
        if self.n_vertices < 0:
            raise ShapeError("n_vertices must be non-negative")
        if len(self.weights) != len(self.edges):
            raise ShapeError(
                f"{len(self.weights)} weights for {len(self.edges)} edges"
            )
        if len(self.block_tags) != len(self.edges):
            raise ShapeError(
                f"{len(self.block_tags)} tags for {len(self.edges)} edges"
            )
        if not np.all(self.weights > 0.0):
            raise ShapeError("edge weights must be positive at construction")
        for e in self.edges:
            if e and (e[0] < 0 or e[-1] >= self.n_vertices):
                raise ShapeError(f"edge {e} has vertex ids outside 0..{self.n_vertices - 1}")
        self.d_v, self.d_e = degrees(self)

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def degrees(hg: Hypergraph) -> tuple[np.ndarray, np.ndarray]:
    """Vertex degrees (edges containing each vertex) and edge degrees
    (vertices in each edge).  Both are plain incidence counts."""
    d_v = np.zeros(hg.n_vertices, dtype=np.float64)
    d_e = np.zeros(len(hg.edges), dtype=np.float64)
    for j, e in enumerate(hg.edges):
        d_e[j] = len(e)
        for i in e:
            d_v[i] += 1.0
    return d_v, d_e


def auto_k(b: int, c: int, n_vertices: int) -> int:
    """Neighbor count k = max(b, c), clamped to n_vertices - 1.

    The dimension-driven rule can exceed the number of available
    neighbors on small corpora, so the clamp keeps construction defined.
    """
    if n_vertices < 2:
        raise ShapeError("need at least 2 vertices to have neighbors")
    return min(max(int(b), int(c)), n_vertices - 1)


def knn_indices(features: np.ndarray, k: int) -> np.ndarray:
    """(n, k) matrix of each row's top-k cosine neighbors, self excluded.

    Neighbors are ordered by descending similarity with ties broken
    toward the lowest index (stable sort over the index axis).
    """
    f = as_matrix(features, "features")
    n = f.shape[0]
    if not 1 <= k <= n - 1:
        raise ShapeError(f"k={k} outside valid range 1..{n - 1}")
    sims = cosine_similarity_matrix(f, f)
    order = np.argsort(-sims, axis=1, kind="stable")
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        row = order[i]
        out[i] = row[row != i][:k]
    return out


def knn_hyperedges(features: np.ndarray, k: int, tag: str = TAG_ORIGINAL) -> Hypergraph:
    """One hyperedge per vertex: {i} plus i's k nearest cosine neighbors.

    All weights start at 1; every edge has cardinality k + 1 because the
    center vertex always joins its own edge.
    """
    nbrs = knn_indices(features, k)
    n = nbrs.shape[0]
    edges = [tuple(sorted([i, *nbrs[i].tolist()])) for i in range(n)]
    return Hypergraph(
        n_vertices=n,
        edges=tuple(edges),
        weights=np.ones(n, dtype=np.float64),
        block_tags=tuple([tag] * n),
    )


def concat_incidence(parts: list[Hypergraph]) -> Hypergraph:
    """Concatenate incidence blocks along the edge axis.

    Edge lists, weights, and block tags stack in the given order; all
    parts must share the vertex set.  Degrees are recomputed over the
    union, so d_v adds across blocks.
    """
    if not parts:
        raise ShapeError("need at least one hypergraph to concatenate")
    n = parts[0].n_vertices
    for p in parts[1:]:
        if p.n_vertices != n:
            raise ShapeError(
                f"vertex counts differ: {n} vs {p.n_vertices}"
            )
    edges: list[tuple[int, ...]] = []
    tags: list[str] = []
    for p in parts:
        edges.extend(p.edges)
        tags.extend(p.block_tags)
    weights = np.concatenate([p.weights for p in parts]) if parts else np.zeros(0)
    return Hypergraph(n_vertices=n, edges=tuple(edges), weights=weights,
                      block_tags=tuple(tags))


def incidence_dense(hg: Hypergraph) -> np.ndarray:
    """Dense 0/1 incidence matrix, shape (n_vertices, n_edges)."""
    H = np.zeros((hg.n_vertices, len(hg.edges)), dtype=np.float64)
    for j, e in enumerate(hg.edges):
        for i in e:
            H[i, j] = 1.0
    return H


def incidence_csr(hg: Hypergraph) -> sp.csr_matrix:
    """Sparse CSR incidence matrix, shape (n_vertices, n_edges)."""
    rows: list[int] = []
    cols: list[int] = []
    for j, e in enumerate(hg.edges):
        rows.extend(e)
        cols.extend([j] * len(e))
    data = np.ones(len(rows), dtype=np.float64)
    return sp.csr_matrix(
        (data, (rows, cols)), shape=(hg.n_vertices, len(hg.edges))
    )


def save_hypergraph_json(path, hg: Hypergraph) -> None:
    """Debug dump: {n_vertices, edges, weights, tags} as JSON."""
    obj = {
        "n_vertices": hg.n_vertices,
        "edges": [list(e) for e in hg.edges],
        "weights": [repr(float(w)) for w in hg.weights],
        "tags": list(hg.block_tags),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_hypergraph_json(path) -> Hypergraph:
    """Inverse of :func:`save_hypergraph_json`."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return Hypergraph(
        n_vertices=int(obj["n_vertices"]),
        edges=tuple(tuple(e) for e in obj["edges"]),
        weights=np.array([float(w) for w in obj["weights"]], dtype=np.float64),
        block_tags=tuple(obj["tags"]),
    )
