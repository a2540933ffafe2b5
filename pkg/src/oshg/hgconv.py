"""Symmetric-normalized hypergraph convolution.

The propagation operator is

    delta = D_v^{-1/2} H W D_e^{-1} H^T D_v^{-1/2}

with the convention that 0^{-1} = 0 and 0^{-1/2} = 0, so isolated
vertices and empty edges contribute nothing instead of dividing by
zero.  Degrees come from the incidence matrix alone; the weights W
enter linearly, which makes the operator scale exactly with a global
weight rescaling.

Two evaluation paths exist and must agree: a dense n x n materialization
of delta, and a sparse path that only ever multiplies by H-shaped
factors (S = D_v^{-1/2} H as CSR).  The sparse path is mandatory above
4096 vertices, where the dense operator would not fit comfortably.

A convolution layer computes sigma(delta F theta).  Layers default to
ReLU; theta for square layers initializes to the identity plus small
Glorot noise so an untrained adapter approximately preserves its input,
which the residual fusion downstream depends on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ShapeError
from .hypergraph import Hypergraph, incidence_csr
from .matrix import Rng, as_matrix, glorot_init

__all__ = [
    "ConvLayer",
    "near_identity_init",
    "propagation_matrix",
    "Propagator",
    "conv_forward",
    "relu",
    "relu_grad",
    "ACTIVATIONS",
]

DENSE_VERTEX_LIMIT = 4096


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(pre: np.ndarray) -> np.ndarray:
    # Subgradient 0 at the kink (strict inequality picks the lower branch).
    return (pre > 0.0).astype(np.float64)


ACTIVATIONS = {
    "relu": (relu, relu_grad),
    "identity": (lambda x: x, lambda pre: np.ones_like(pre)),
}


@dataclass
class ConvLayer:
    """One convolution layer: parameter matrix theta and its activation."""

    theta: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.theta = as_matrix(self.theta, "theta")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(
                f"unknown activation {self.activation!r}; "
                f"choose from {sorted(ACTIVATIONS)}"
            )

    @property
    def d_in(self) -> int:
        return self.theta.shape[0]

    @property
    def d_out(self) -> int:
        return self.theta.shape[1]


def near_identity_init(rng: Rng, d: int, gain: float = 0.1) -> np.ndarray:
    """I_d plus small Glorot noise: the layer starts near a no-op."""
    return np.eye(d) + glorot_init(rng, d, d, gain=gain)


def _inv(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    nz = x != 0.0
    out[nz] = 1.0 / x[nz]
    return out


def _inv_sqrt(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    nz = x > 0.0
    out[nz] = 1.0 / np.sqrt(x[nz])
    return out


class Propagator:
    """Applies delta to vertex features, densely or via sparse factors.

    ``mode`` is "auto" (sparse above ``DENSE_VERTEX_LIMIT`` vertices),
    "dense", or "sparse".  Weights can be overridden per call, which is
    how training evaluates the operator at updated hyperedge weights
    without rebuilding the graph.
    """

    def __init__(self, hg: Hypergraph, mode: str = "auto"):
        if mode not in ("auto", "dense", "sparse"):
            raise ConfigError(f"unknown propagator mode {mode!r}")
        self.hg = hg
        self.n = hg.n_vertices
        self.inv_de = _inv(hg.d_e)
        self.sparse = mode == "sparse" or (mode == "auto" and self.n > DENSE_VERTEX_LIMIT)
        S = incidence_csr(hg)
        dv_inv_sqrt = _inv_sqrt(hg.d_v)
        # S = D_v^{-1/2} H, the only H-shaped factor either path needs.
        self.S = sp.diags(dv_inv_sqrt).dot(S).tocsr()
        self.S_dense = None if self.sparse else self.S.toarray()

    def _weights(self, weights) -> np.ndarray:
        if weights is None:
            return self.hg.weights
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.shape[0] != self.hg.n_edges:
            raise ShapeError(
                f"{w.shape[0]} weights for {self.hg.n_edges} edges"
            )
        return w

    def edge_aggregate(self, m: np.ndarray) -> np.ndarray:
        """S^T m: per-edge aggregation of vertex features, shape (m, d)."""
        return np.asarray(self.S.T.dot(m))

    def apply(self, m: np.ndarray, weights=None) -> np.ndarray:
        """delta @ m without ever forming delta when sparse."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape[0] != self.n:
            raise ShapeError(f"features have {m.shape[0]} rows, graph has {self.n}")
        scale = self._weights(weights) * self.inv_de
        if self.sparse:
            return np.asarray(self.S.dot(scale[:, None] * self.S.T.dot(m)))
        return self.S_dense @ (scale[:, None] * (self.S_dense.T @ m))

    def dense(self, weights=None) -> np.ndarray:
        """Materialize delta as an n x n matrix."""
        scale = self._weights(weights) * self.inv_de
        Sd = self.S.toarray() if self.S_dense is None else self.S_dense
        return (Sd * scale) @ Sd.T

    def weight_grad(self, m: np.ndarray, dout: np.ndarray, weights=None) -> np.ndarray:
        """d(loss)/d(weights) given m and the upstream gradient on delta@m.

        delta is linear in each w_j, so the gradient is the per-edge dot
        product of the two aggregations scaled by 1/d_e.
        """
        agg_m = self.edge_aggregate(m)
        agg_d = self.edge_aggregate(dout)
        return (agg_m * agg_d).sum(axis=1) * self.inv_de


def propagation_matrix(hg: Hypergraph, weights=None) -> np.ndarray:
    """Dense delta for a hypergraph (zero-degree convention applied)."""
    return Propagator(hg, mode="dense").dense(weights)


def _check_chain(layers, d0: int) -> None:
    d = d0
    for i, layer in enumerate(layers):
        if layer.d_in != d:
            raise ShapeError(
                f"layer {i} expects input dim {layer.d_in}, got {d}"
            )
        d = layer.d_out


def conv_forward(hg: Hypergraph, layers, f0: np.ndarray, weights=None,
                 mode: str = "auto") -> np.ndarray:
    """Run F <- sigma(delta F theta) once per layer."""
    f = as_matrix(f0, "f0")
    if f.shape[0] != hg.n_vertices:
        raise ShapeError(
            f"f0 has {f.shape[0]} rows for {hg.n_vertices} vertices"
        )
    _check_chain(layers, f.shape[1])
    prop = Propagator(hg, mode=mode)
    for layer in layers:
        act, _ = ACTIVATIONS[layer.activation]
        f = act(prop.apply(f, weights) @ layer.theta)
    return f
