"""Text and vision adapters: projection and residual fusion.

The text adapter runs the fused (b+c)-dim caption features through a
hypergraph convolution, projects back to the base dimensionality by
taking the first b columns (multiplication by the selector [I_b 0]^T,
implemented as a bit-exact column slice), and blends with the original
dataset embedding:

    F_final = (1 - alpha) * psi(conv(F)) + alpha * T_dataset

alpha = 1 reproduces the dataset embedding exactly and alpha = 0 uses
the hypergraph path alone; the map is affine in alpha between those
endpoints.  alpha is either fixed or derived from a normalized
mutual-information estimate once per training epoch.

The vision adapter keeps dimensionality and applies a residual step per
layer:

    V <- beta * sigma(delta V theta) + (1 - beta) * V

beta = 0 is an exact no-op (the static-visual baseline).  beta defaults
to alpha elsewhere in the package so both modalities mix original and
graph-processed signal in the same ratio, but it stays independently
configurable.

Checkpoints are a directory holding a JSON manifest plus one EMB blob
per parameter matrix, so saved runs diff cleanly and reload bit-exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dataio import parse_emb_file, write_emb_file
from .errors import ConfigError, DataError, ShapeError
from .hgconv import ConvLayer, conv_forward, ACTIVATIONS
from .hypergraph import Hypergraph
from .matrix import as_matrix

__all__ = [
    "TextAdapter",
    "VisionAdapter",
    "project_psi",
    "fuse_text",
    "fuse_vision",
    "save_checkpoint",
    "load_checkpoint",
]

ALPHA_MODES = ("fixed", "nmi")


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


@dataclass
class TextAdapter:
    """Caption-side adapter: hypergraph conv + psi projection + residual."""

    hg: Hypergraph
    layers: list[ConvLayer]
    b: int
    c: int
    alpha_mode: str = "fixed"
    alpha: float = 0.2

    def __post_init__(self):
        if self.alpha_mode not in ALPHA_MODES:
            raise ConfigError(
                f"alpha_mode must be one of {ALPHA_MODES}, got {self.alpha_mode!r}"
            )
        self.alpha = _check_alpha(self.alpha)
        if self.b < 1 or self.c < 0:
            raise ShapeError("need b >= 1 and c >= 0")
        if self.layers and self.layers[0].d_in != self.b + self.c:
            raise ShapeError(
                f"first layer expects dim {self.layers[0].d_in}, "
                f"fused features have dim {self.b + self.c}"
            )


@dataclass
class VisionAdapter:
    """Image-side adapter: per-layer residual hypergraph conv steps."""

    hg: Hypergraph
    layers: list[ConvLayer]
    beta: float

    def __post_init__(self):
        self.beta = float(self.beta)
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta}")
        for i, layer in enumerate(self.layers):
            if layer.d_in != layer.d_out:
                raise ShapeError(
                    f"vision layer {i} must be square to support the residual, "
                    f"got {layer.d_in}x{layer.d_out}"
                )


def project_psi(f: np.ndarray, b: int) -> np.ndarray:
    """First b columns of f: multiplication by the selector [I_b 0]^T.

    The slice-and-copy is bit-exact, which keeps the untouched base
    block of a fused feature recoverable without rounding.
    """
    f = as_matrix(f, "f")
    if b < 0 or f.shape[1] < b:
        raise ShapeError(f"cannot take first {b} columns of dim {f.shape[1]}")
    return f[:, :b].copy()


def fuse_text(adapter: TextAdapter, t_dataset: np.ndarray, f_fused: np.ndarray,
              alpha: float | None = None, weights=None) -> np.ndarray:
    """(1 - alpha) * psi(conv(f_fused)) + alpha * t_dataset, shape (n, b)."""
    alpha = adapter.alpha if alpha is None else _check_alpha(alpha)
    t = as_matrix(t_dataset, "t_dataset")
    f = as_matrix(f_fused, "f_fused")
    if t.shape != (f.shape[0], adapter.b):
        raise ShapeError(
            f"t_dataset shape {t.shape} does not match ({f.shape[0]}, {adapter.b})"
        )
    conv = conv_forward(adapter.hg, adapter.layers, f, weights=weights)
    return (1.0 - alpha) * project_psi(conv, adapter.b) + alpha * t


def fuse_vision(adapter: VisionAdapter, v: np.ndarray, weights=None) -> np.ndarray:
    """Residual steps v <- beta * sigma(delta v theta) + (1 - beta) * v."""
    v = as_matrix(v, "v")
    if v.shape[0] != adapter.hg.n_vertices:
        raise ShapeError(
            f"v has {v.shape[0]} rows for {adapter.hg.n_vertices} vertices"
        )
    beta = adapter.beta
    if beta == 0.0:
        # Exact no-op, including bit-exactness: skip the conv entirely.
        return v.copy()
    for layer in adapter.layers:
        if layer.d_in != v.shape[1]:
            raise ShapeError(
                f"vision layer expects dim {layer.d_in}, features have {v.shape[1]}"
            )
        step = conv_forward(adapter.hg, [layer], v, weights=weights)
        v = beta * step + (1.0 - beta) * v
    return v


def save_checkpoint(path, manifest: dict, blobs: dict[str, np.ndarray]) -> None:
    """Write a checkpoint directory: manifest.json + one EMB file per blob.

    Blob keys become file names; vectors are stored as 1 x n matrices.
    Serialization is deterministic (sorted keys, shortest round-trip
    floats) so identical states produce byte-identical checkpoints.
    """
    os.makedirs(path, exist_ok=True)
    manifest = dict(manifest)
    manifest["blobs"] = sorted(blobs)
    with open(os.path.join(path, "manifest.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    for key, value in blobs.items():
        m = np.asarray(value, dtype=np.float64)
        if m.ndim == 1:
            m = m[None, :]
        write_emb_file(os.path.join(path, f"{key}.emb"), m)


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read back a checkpoint directory written by :func:`save_checkpoint`."""
    manifest_path = os.path.join(path, "manifest.json")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"no manifest.json under {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed manifest.json: {exc.msg}") from None
    blobs = {}
    for key in manifest.get("blobs", []):
        blobs[key] = parse_emb_file(os.path.join(path, f"{key}.emb"))
    return manifest, blobs
