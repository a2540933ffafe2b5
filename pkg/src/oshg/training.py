"""Training: triplet loss, manual backpropagation, gradient verification.

The trainable state is small and explicit: one square parameter matrix
per conv layer on each side, plus the hyperedge weight vectors of the
text and vision graphs.  Updates are plain SGD without momentum so a
checkpoint is a pure function of (corpus, config); two runs with the
same seed must produce byte-identical artifacts.

The loss is a bidirectional hinge with online hardest negatives: for
every positive image-caption pair, the highest-scoring negative caption
(per image) and negative image (per caption) within the batch define

    [m - s_pos + s_neg_cap]_+ + [m - s_pos + s_neg_img]_+

summed over positive pairs.  Captions of the same image are masked out
of each other's negative sets.

All gradients are hand-derived reverse mode.  At non-differentiable
points the subgradient follows the same branch the forward pass took:
ReLU kinks take the zero branch, hinge boundaries contribute nothing,
and argmax ties resolve to the lowest index.  ``finite_diff_check``
verifies the whole chain against central differences, excluding (and
counting) coordinates whose forward evaluations sit within 10h of a
kink, where a two-sided difference would straddle two branches.

The gradient-deviation diagnostic is the Frobenius norm of the
difference between the loss gradients with respect to the two final
joint-space embeddings, taken row-aligned over the batch pairs.  A
vision adapter that moves image features (beta > 0) can only lower or
match this asymmetry relative to the frozen-vision configuration.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .adapter import load_checkpoint, save_checkpoint
from .dataio import CaptionRecord, embed_texts, hash_embed
from .errors import ConfigError, DataError, ShapeError, TrainingDiverged
from .hgconv import ACTIVATIONS, Propagator, near_identity_init
from .hypergraph import (
    Hypergraph,
    auto_k,
    concat_incidence,
    knn_hyperedges,
    tag_synonym,
)
from .infotheory import nmi_alpha
from .kernels import KERNELS, knn_adjacency, normalized_adjacency, pool_neighbors
from .matrix import Rng, as_matrix
from .retrieval import EvalReport, evaluate

__all__ = [
    "TrainConfig",
    "Corpus",
    "build_corpus",
    "Model",
    "load_model",
    "triplet_loss",
    "grad_deviation",
    "GradCheckReport",
    "finite_diff_check",
    "EpochStats",
    "TrainResult",
    "train",
    "write_log_csv",
]

WEIGHT_FLOOR = 1e-6


@dataclass
class TrainConfig:
    """Hyperparameters; defaults are artifact choices, not tuned claims."""

    margin: float = 0.2
    lr: float = 0.05
    epochs: int = 15
    batch: int = 64
    seed: int = 0
    alpha_mode: str = "fixed"
    alpha: float = 0.2
    beta: float | None = None
    l: int = 4
    knn_k: int | None = None
    activation: str = "relu"
    init_gain: float = 0.1
    kernel: str = "hypergraph"

    def __post_init__(self):
        if self.margin <= 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch < 2:
            raise ConfigError(f"batch must be >= 2, got {self.batch}")
        if self.alpha_mode not in ("fixed", "nmi"):
            raise ConfigError(f"unknown alpha_mode {self.alpha_mode!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta}")
        if self.l < 0:
            raise ConfigError(f"l must be >= 0, got {self.l}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.kernel not in KERNELS:
            raise ConfigError(
                f"unknown kernel {self.kernel!r}; choose from {KERNELS}"
            )


@dataclass
class Corpus:
    """Aligned desk-scale corpus: caption features, synonym slot
    features, pooled image features, and the caption-to-image map."""

    t_dataset: np.ndarray
    syn_slots: list[np.ndarray]
    v_features: np.ndarray
    cap_owner: np.ndarray

    def __post_init__(self):
        self.t_dataset = as_matrix(self.t_dataset, "t_dataset")
        self.v_features = as_matrix(self.v_features, "v_features")
        self.syn_slots = [as_matrix(s, "syn_slot") for s in self.syn_slots]
        self.cap_owner = np.asarray(self.cap_owner, dtype=np.int64).ravel()
        n = self.t_dataset.shape[0]
        if self.cap_owner.shape[0] != n:
            raise DataError(
                f"{self.cap_owner.shape[0]} owners for {n} captions"
            )
        if n and (self.cap_owner.min() < 0
                  or self.cap_owner.max() >= self.v_features.shape[0]):
            raise DataError("cap_owner points at a missing image")
        if self.t_dataset.shape[1] != self.v_features.shape[1]:
            raise ShapeError(
                "caption and image features must share the joint dimension, "
                f"got {self.t_dataset.shape[1]} vs {self.v_features.shape[1]}"
            )
        for s in self.syn_slots:
            if s.shape[0] != n:
                raise ShapeError("synonym slot row count must match captions")
        cdims = {s.shape[1] for s in self.syn_slots}
        if len(cdims) > 1:
            raise ShapeError("synonym slots must share one dimension")

    @property
    def n_captions(self) -> int:
        return self.t_dataset.shape[0]

    @property
    def n_images(self) -> int:
        return self.v_features.shape[0]

    @property
    def b(self) -> int:
        return self.t_dataset.shape[1]

    @property
    def c(self) -> int:
        return self.syn_slots[0].shape[1] if self.syn_slots else 0

    @property
    def l(self) -> int:
        return len(self.syn_slots)

    @property
    def fused(self) -> np.ndarray:
        """(n, b+c) features: base block then the mean synonym block."""
        if not self.syn_slots:
            return self.t_dataset.copy()
        mean_syn = np.mean(self.syn_slots, axis=0)
        return np.concatenate([self.t_dataset, mean_syn], axis=1)


def build_corpus(records: list[CaptionRecord], image_ids: list[str],
                 image_feats: np.ndarray, b: int, c: int, l: int,
                 seed: int) -> Corpus:
    """Embed caption records against pooled image features.

    Caption texts hash into b dims, each of the l synonym slots into c
    dims (missing slots stay zero rows).  ``image_ids`` gives the row
    order of ``image_feats``; every record's image_id must appear.
    """
    id_to_row = {iid: i for i, iid in enumerate(image_ids)}
    owner = []
    for rec in records:
        if rec.image_id not in id_to_row:
            raise DataError(f"caption {rec.caption_id!r} references unknown "
                            f"image {rec.image_id!r}")
        owner.append(id_to_row[rec.image_id])
    t = embed_texts([r.text for r in records], b, seed)
    slots = []
    for j in range(l):
        rows = np.zeros((len(records), c), dtype=np.float64)
        for i, rec in enumerate(records):
            if j < len(rec.synonyms):
                rows[i] = hash_embed(rec.synonyms[j], c, seed)
        slots.append(rows)
    return Corpus(t_dataset=t, syn_slots=slots,
                  v_features=as_matrix(image_feats, "image_feats"),
                  cap_owner=np.array(owner, dtype=np.int64))


def triplet_loss(sim: np.ndarray, positives, margin: float) -> float:
    """Bidirectional hardest-negative hinge loss over positive pairs."""
    loss, _, _ = _triplet_terms(np.asarray(sim, dtype=np.float64),
                                positives, float(margin))
    return loss


def _positive_mask(sim: np.ndarray, positives) -> np.ndarray:
    n_img, n_cap = sim.shape
    mask = np.zeros((n_img, n_cap), dtype=bool)
    for i, cols in positives.items():
        for c in cols:
            if not (0 <= i < n_img and 0 <= c < n_cap):
                raise ShapeError(f"positive pair ({i}, {c}) outside matrix")
            mask[i, c] = True
    return mask


def _triplet_terms(sim, positives, margin, row_groups=None):
    """Loss, d(loss)/d(sim), and kink margins for the hinge stage.

    Kink margins: the absolute hinge arguments (distance to hinge
    activation boundaries) and the top1-top2 gaps of each hardest-
    negative selection (distance to an argmax tie).  ``row_groups``
    labels rows that are duplicates of one underlying image; an argmax
    tie inside one group is not a kink because every member routes its
    gradient to the same image row.
    """
    if sim.ndim != 2 or sim.shape[0] < 2 or sim.shape[1] < 2:
        raise ShapeError("similarity matrix must be at least 2x2")
    if row_groups is None:
        row_groups = np.arange(sim.shape[0])
    pos_mask = _positive_mask(sim, positives)
    if not pos_mask.any():
        raise ShapeError("no positive pairs given")
    loss = 0.0
    dsim = np.zeros_like(sim)
    kink = np.inf
    neg = np.where(pos_mask, -np.inf, sim)
    for i, cols in positives.items():
        for cpos in cols:
            s_pos = sim[i, cpos]
            # caption direction: hardest negative caption for image i
            row = neg[i]
            if not np.isfinite(row).any():
                raise ShapeError(f"image {i} has no negative captions in batch")
            c_star = int(np.argmax(row))
            top = row[c_star]
            rest = np.delete(row, c_star)
            finite = rest[np.isfinite(rest)]
            if finite.size:
                kink = min(kink, float(top - finite.max()))
            arg = margin - s_pos + top
            kink = min(kink, abs(float(arg)))
            if arg > 0:
                loss += arg
                dsim[i, cpos] -= 1.0
                dsim[i, c_star] += 1.0
            # image direction: hardest negative image for caption cpos
            col = neg[:, cpos]
            if not np.isfinite(col).any():
                raise ShapeError(f"caption {cpos} has no negative images in batch")
            i_star = int(np.argmax(col))
            top = col[i_star]
            others = np.isfinite(col) & (row_groups != row_groups[i_star])
            if others.any():
                kink = min(kink, float(top - col[others].max()))
            arg = margin - s_pos + top
            kink = min(kink, abs(float(arg)))
            if arg > 0:
                loss += arg
                dsim[i, cpos] -= 1.0
                dsim[i_star, cpos] += 1.0
    return float(loss), dsim, float(kink)


def grad_deviation(dl_dv: np.ndarray, dl_dt: np.ndarray) -> float:
    """Frobenius norm of the cross-modal gradient difference."""
    a = np.asarray(dl_dv, dtype=np.float64)
    b = np.asarray(dl_dt, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"gradient shapes differ: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def _cosine_forward(v: np.ndarray, t: np.ndarray):
    """Cosine matrix plus the pieces its backward pass needs."""
    nv = np.linalg.norm(v, axis=1)
    nt = np.linalg.norm(t, axis=1)
    v_hat = v / np.where(nv == 0.0, 1.0, nv)[:, None]
    t_hat = t / np.where(nt == 0.0, 1.0, nt)[:, None]
    return v_hat @ t_hat.T, v_hat, t_hat, nv, nt


def _cosine_backward(dsim, sim, v_hat, t_hat, nv, nt):
    inv_nv = np.where(nv == 0.0, 0.0, 1.0 / np.where(nv == 0.0, 1.0, nv))
    inv_nt = np.where(nt == 0.0, 0.0, 1.0 / np.where(nt == 0.0, 1.0, nt))
    row_dot = (dsim * sim).sum(axis=1)
    col_dot = (dsim * sim).sum(axis=0)
    dv = (dsim @ t_hat - row_dot[:, None] * v_hat) * inv_nv[:, None]
    dt = (dsim.T @ v_hat - col_dot[:, None] * t_hat) * inv_nt[:, None]
    return dv, dt


class Model:
    """Adapter parameters plus the machinery to differentiate them.

    Exposes the protocol the finite-difference checker consumes:
    ``param_blocks()`` (live arrays), ``loss_and_margin(batch)`` (scalar
    loss plus distance to the nearest forward kink), and
    ``gradients(batch)`` (one array per block).
    """

    def __init__(self, corpus: Corpus, config: TrainConfig):
        self.corpus = corpus
        self.config = config
        self.alpha = config.alpha
        self.beta = config.alpha if config.beta is None else config.beta
        self.activation = config.activation
        self._act, self._act_grad = ACTIVATIONS[config.activation]

        n_cap, n_img = corpus.n_captions, corpus.n_images
        b, c = corpus.b, corpus.c
        if n_cap < 2 or n_img < 2:
            raise ShapeError("need at least 2 captions and 2 images")
        self.k_text = (config.knn_k if config.knn_k is not None
                       else auto_k(b, c, n_cap))
        if not 1 <= self.k_text <= n_cap - 1:
            raise ConfigError(f"knn_k={self.k_text} invalid for {n_cap} captions")
        self.k_vision = min(b, n_img - 1)

        self.fused = corpus.fused
        self.kernel = config.kernel
        rng = Rng(config.seed)

        if self.kernel == "hypergraph":
            parts = [knn_hyperedges(corpus.t_dataset, self.k_text)]
            for j, slot in enumerate(corpus.syn_slots, start=1):
                parts.append(knn_hyperedges(slot, self.k_text,
                                            tag=tag_synonym(j)))
            self.hg_text: Hypergraph = concat_incidence(parts)
            # Sparse products keep per-step cost proportional to incidence
            # size; agreement with the dense operator is covered by tests.
            self.prop_text = Propagator(self.hg_text, mode="sparse")
            self.theta_text = near_identity_init(rng.spawn(1), b + c,
                                                 gain=config.init_gain)
            self.w_text = self.hg_text.weights.copy()
        elif self.kernel == "pairwise_graph":
            # the propagated features are constant, so fold them once
            ahat = normalized_adjacency(knn_adjacency(self.fused, self.k_text))
            self._prop_fused = ahat @ self.fused
            self.theta_text = near_identity_init(rng.spawn(1), b + c,
                                                 gain=config.init_gain)
        else:
            mode = "mean" if self.kernel == "avg_pool" else "max"
            self._pooled = pool_neighbors(self.fused, self.k_text, mode)

        self.hg_vision: Hypergraph = knn_hyperedges(corpus.v_features,
                                                    self.k_vision)
        self.prop_vision = Propagator(self.hg_vision, mode="sparse")
        self.theta_vision = near_identity_init(rng.spawn(2), b,
                                               gain=config.init_gain)
        self.w_vision = self.hg_vision.weights.copy()

    def param_blocks(self) -> dict[str, np.ndarray]:
        """Live parameter arrays; pooling kernels train only the vision side."""
        if self.kernel == "hypergraph":
            return {
                "theta_text": self.theta_text,
                "theta_vision": self.theta_vision,
                "w_text": self.w_text,
                "w_vision": self.w_vision,
            }
        if self.kernel == "pairwise_graph":
            return {
                "theta_text": self.theta_text,
                "theta_vision": self.theta_vision,
                "w_vision": self.w_vision,
            }
        return {"theta_vision": self.theta_vision, "w_vision": self.w_vision}

    # -- forward ---------------------------------------------------------

    def _forward_text(self):
        if self.kernel == "hypergraph":
            M = self.prop_text.apply(self.fused, self.w_text)
            P = M @ self.theta_text
            X = self._act(P)
        elif self.kernel == "pairwise_graph":
            M = self._prop_fused
            P = M @ self.theta_text
            X = P  # the pairwise kernel is linear
        else:
            M = P = None  # pooling has no parameters on the text side
            X = self._pooled
        t_final = ((1.0 - self.alpha) * X[:, : self.corpus.b]
                   + self.alpha * self.corpus.t_dataset)
        return t_final, M, P, X

    def _forward_vision(self):
        Z0 = self.corpus.v_features
        M = self.prop_vision.apply(Z0, self.w_vision)
        P = M @ self.theta_vision
        X = self._act(P)
        v_final = self.beta * X + (1.0 - self.beta) * Z0
        return v_final, M, P, X

    def embeddings(self) -> tuple[np.ndarray, np.ndarray]:
        """Final joint-space caption and image embeddings."""
        t_final, _, _, _ = self._forward_text()
        v_final, _, _, _ = self._forward_vision()
        return t_final, v_final

    def psi_output(self) -> np.ndarray:
        """Projected adapter output (pre-fusion), used for the NMI ratio."""
        _, _, _, X = self._forward_text()
        return X[:, : self.corpus.b]

    def refresh_alpha(self, bins: int = 64) -> float:
        """Recompute alpha from NMI between the dataset embedding and the
        projected conv output; beta follows when not pinned."""
        if self.config.alpha_mode == "nmi":
            self.alpha = nmi_alpha(self.corpus.t_dataset, self.psi_output(),
                                   bins)
            if self.config.beta is None:
                self.beta = self.alpha
        return self.alpha

    # -- loss and gradients ----------------------------------------------

    def _batch_positives(self, img_idx: np.ndarray) -> dict[int, list[int]]:
        pos: dict[int, list[int]] = {}
        for row, img in enumerate(img_idx):
            pos[row] = [c for c, other in enumerate(img_idx) if other == img]
        return pos

    def _forward_batch(self, cap_idx: np.ndarray):
        cap_idx = np.asarray(cap_idx, dtype=np.int64).ravel()
        if cap_idx.size < 2:
            raise ShapeError("batch needs at least 2 caption indices")
        img_idx = self.corpus.cap_owner[cap_idx]
        t_final, Mt, Pt, Xt = self._forward_text()
        v_final, Mv, Pv, Xv = self._forward_vision()
        t_b = t_final[cap_idx]
        v_b = v_final[img_idx]
        if not (np.all(np.isfinite(t_b)) and np.all(np.isfinite(v_b))):
            raise TrainingDiverged("embeddings became non-finite")
        sim, v_hat, t_hat, nv, nt = _cosine_forward(v_b, t_b)
        positives = self._batch_positives(img_idx)
        loss, dsim, hinge_kink = _triplet_terms(sim, positives,
                                                self.config.margin,
                                                row_groups=img_idx)
        return {
            "cap_idx": cap_idx, "img_idx": img_idx,
            "t_final": t_final, "v_final": v_final,
            "Mt": Mt, "Pt": Pt, "Mv": Mv, "Pv": Pv,
            "sim": sim, "dsim": dsim,
            "v_hat": v_hat, "t_hat": t_hat, "nv": nv, "nt": nt,
            "loss": loss, "hinge_kink": hinge_kink,
        }

    def _kink_margin(self, cache) -> float:
        """Distance from this forward pass to the nearest subgradient
        branch boundary: hinge/argmax kinks, live ReLU zeros, and
        vanishing cosine norms."""
        margin = cache["hinge_kink"]
        if self.activation == "relu":
            if self.kernel == "hypergraph" and self.alpha < 1.0:
                margin = min(margin, float(np.abs(cache["Pt"]).min()))
            if self.beta > 0.0:
                margin = min(margin, float(np.abs(cache["Pv"]).min()))
        margin = min(margin, float(cache["nv"].min()), float(cache["nt"].min()))
        return margin

    def loss_and_margin(self, cap_idx) -> tuple[float, float]:
        cache = self._forward_batch(cap_idx)
        return cache["loss"], self._kink_margin(cache)

    def gradients(self, cap_idx):
        """Reverse-mode gradients for every parameter block.

        Returns (grads, info) where info carries the loss, the batch
        pair gradients for the deviation diagnostic, and the kink
        margin of the forward pass.
        """
        cache = self._forward_batch(cap_idx)
        dsim = cache["dsim"]
        dv_b, dt_b = _cosine_backward(dsim, cache["sim"], cache["v_hat"],
                                      cache["t_hat"], cache["nv"], cache["nt"])

        n_cap, n_img = self.corpus.n_captions, self.corpus.n_images
        b = self.corpus.b
        dT = np.zeros((n_cap, b))
        np.add.at(dT, cache["cap_idx"], dt_b)
        dV = np.zeros((n_img, b))
        np.add.at(dV, cache["img_idx"], dv_b)

        grads: dict[str, np.ndarray] = {}

        # text chain: T_final = (1-a) X[:, :b] + a T_ds
        dXt = np.zeros((n_cap, b + self.corpus.c))
        dXt[:, :b] = (1.0 - self.alpha) * dT
        if self.kernel == "hypergraph":
            # X = relu(Delta F Theta) with trainable edge weights
            dPt = dXt * self._act_grad(cache["Pt"])
            grads["theta_text"] = cache["Mt"].T @ dPt
            dMt = dPt @ self.theta_text.T
            grads["w_text"] = self.prop_text.weight_grad(self.fused, dMt)
        elif self.kernel == "pairwise_graph":
            # X = (Ahat F) Theta, linear
            grads["theta_text"] = cache["Mt"].T @ dXt
        # pooling kernels: no text-side parameters

        # vision chain: V_final = beta relu(Delta V Theta) + (1-beta) V
        dXv = self.beta * dV
        dPv = dXv * self._act_grad(cache["Pv"])
        grads["theta_vision"] = cache["Mv"].T @ dPv
        dMv = dPv @ self.theta_vision.T
        grads["w_vision"] = self.prop_vision.weight_grad(
            self.corpus.v_features, dMv)
        info = {
            "loss": cache["loss"],
            "margin": self._kink_margin(cache),
            "dv_batch": dv_b,
            "dt_batch": dt_b,
            "grad_dev": grad_deviation(dv_b, dt_b),
        }
        return grads, info

    def sgd_step(self, cap_idx, lr: float):
        grads, info = self.gradients(cap_idx)
        if not np.isfinite(info["loss"]):
            raise TrainingDiverged(f"loss became {info['loss']!r}")
        for name, g in grads.items():
            param = getattr(self, name)
            if name.startswith("w_"):
                # hyperedge weights stay strictly positive
                setattr(self, name, np.maximum(param - lr * g, WEIGHT_FLOOR))
            else:
                param -= lr * g
        return info

    def evaluate_corpus(self) -> EvalReport:
        t_final, v_final = self.embeddings()
        return evaluate(v_final, t_final, self.corpus.cap_owner)

    def checkpoint_manifest(self) -> dict:
        return {
            "b": self.corpus.b,
            "c": self.corpus.c,
            "l": self.corpus.l,
            "kernel": self.kernel,
            "alpha_mode": self.config.alpha_mode,
            "alpha": self.alpha,
            "beta": self.beta,
            "layer_dims": [list(blk.shape)
                           for name, blk in sorted(self.param_blocks().items())
                           if name.startswith("theta")],
            "activation": self.activation,
            "seed": self.config.seed,
            "knn_k_text": self.k_text,
            "knn_k_vision": self.k_vision,
            "margin": self.config.margin,
            "lr": self.config.lr,
        }

    def save(self, path) -> None:
        save_checkpoint(path, self.checkpoint_manifest(), self.param_blocks())


def load_model(path, corpus: Corpus) -> Model:
    """Rebuild a model from a checkpoint directory and a matching corpus.

    The manifest pins the graph construction (kernel, neighbor counts,
    activation) and the fusion state; the parameter blobs must match the
    shapes the corpus implies, else the checkpoint belongs to different
    data and loading fails.
    """
    manifest, blobs = load_checkpoint(path)
    needed = ("kernel", "alpha_mode", "alpha", "beta", "activation", "seed",
              "knn_k_text", "margin", "lr")
    missing = [key for key in needed if key not in manifest]
    if missing:
        raise DataError(f"checkpoint manifest lacks fields {missing}")
    config = TrainConfig(
        margin=manifest["margin"],
        lr=manifest["lr"],
        seed=manifest["seed"],
        alpha_mode=manifest["alpha_mode"],
        alpha=manifest["alpha"],
        beta=manifest["beta"],
        l=corpus.l,
        knn_k=manifest["knn_k_text"],
        activation=manifest["activation"],
        kernel=manifest["kernel"],
    )
    model = Model(corpus, config)
    model.alpha = float(manifest["alpha"])
    if manifest["beta"] is not None:
        model.beta = float(manifest["beta"])
    for name, param in model.param_blocks().items():
        if name not in blobs:
            raise DataError(f"checkpoint lacks parameter blob {name!r}")
        arr = blobs[name].ravel() if param.ndim == 1 else blobs[name]
        if arr.shape != param.shape:
            raise DataError(
                f"checkpoint blob {name!r} has shape {arr.shape}, the "
                f"corpus implies {param.shape}"
            )
        setattr(model, name, arr.astype(np.float64))
    return model


@dataclass(frozen=True)
class GradCheckReport:
    """Finite-difference verification summary per parameter block."""

    h: float
    tol: float
    block_errors: dict
    checked: dict
    excluded: dict
    passed: bool


def finite_diff_check(model, cap_idx, h: float = 1e-6, tol: float = 1e-4,
                      coords_per_block: int = 20,
                      seed: int = 0) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    For each parameter block, sample coordinates, evaluate the loss at
    +h and -h, and compare (l+ - l-) / 2h with the analytic entry using
    relative error |a - n| / max(|a|, |n|, 1e-12).  A coordinate is
    excluded (and counted) when any of its three forward passes sits
    within 10h of a kink, since the difference would then mix branches.
    """
    if not 1e-8 <= h <= 1e-4:
        raise ConfigError(f"h must lie in [1e-8, 1e-4], got {h}")
    grads, info = model.gradients(cap_idx)
    center_margin = info["margin"]
    rng = Rng(seed)
    blocks = model.param_blocks()
    block_errors: dict[str, float] = {}
    checked: dict[str, int] = {}
    excluded: dict[str, int] = {}
    passed = True
    for name in sorted(blocks):
        param = blocks[name]
        flat = param.reshape(-1)
        n_coords = min(coords_per_block, flat.size)
        coords = rng.choice(flat.size, n_coords)
        worst = 0.0
        n_checked = 0
        n_excluded = 0
        for idx in coords.tolist():
            analytic = float(grads[name].reshape(-1)[idx])
            original = flat[idx]
            flat[idx] = original + h
            l_plus, m_plus = model.loss_and_margin(cap_idx)
            flat[idx] = original - h
            l_minus, m_minus = model.loss_and_margin(cap_idx)
            flat[idx] = original
            if min(center_margin, m_plus, m_minus) < 10.0 * h:
                n_excluded += 1
                continue
            numeric = (l_plus - l_minus) / (2.0 * h)
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric),
                                                1e-12)
            worst = max(worst, err)
            n_checked += 1
        block_errors[name] = worst
        checked[name] = n_checked
        excluded[name] = n_excluded
        if n_checked and worst > tol:
            passed = False
    return GradCheckReport(h=h, tol=tol, block_errors=block_errors,
                           checked=checked, excluded=excluded, passed=passed)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    rsum: float
    grad_dev: float
    alpha: float


@dataclass
class TrainResult:
    model: Model
    epochs: list[EpochStats] = field(default_factory=list)

    @property
    def deviation_trace(self) -> list[float]:
        return [e.grad_dev for e in self.epochs]

    @property
    def final_report(self) -> EvalReport:
        return self.model.evaluate_corpus()


def _batches(rng: Rng, n: int, size: int):
    perm = rng.permutation(n)
    for start in range(0, n, size):
        chunk = perm[start:start + size]
        if chunk.size >= 2:
            yield chunk


def train(config: TrainConfig, corpus: Corpus, out_dir=None) -> TrainResult:
    """SGD over the full pipeline; deterministic given the seed.

    Per epoch: refresh alpha when in nmi mode, run shuffled batches,
    record mean loss, mean gradient deviation, and the full-corpus
    RSUM.  Writes checkpoint plus CSV log when ``out_dir`` is given.
    """
    model = Model(corpus, config)
    batch_rng = Rng(config.seed).spawn(3)
    result = TrainResult(model=model)
    for epoch in range(1, config.epochs + 1):
        model.refresh_alpha()
        losses = []
        devs = []
        for cap_idx in _batches(batch_rng, corpus.n_captions, config.batch):
            info = model.sgd_step(cap_idx, config.lr)
            losses.append(info["loss"])
            devs.append(info["grad_dev"])
        if not losses:
            raise ShapeError("corpus too small to form a single batch")
        report = model.evaluate_corpus()
        result.epochs.append(EpochStats(
            epoch=epoch,
            loss=float(np.mean(losses)),
            rsum=report.rsum,
            grad_dev=float(np.mean(devs)),
            alpha=model.alpha,
        ))
    if out_dir is not None:
        model.save(out_dir)
        write_log_csv(os.path.join(out_dir, "log.csv"), result.epochs)
    return result


def write_log_csv(path, epochs: list[EpochStats]) -> None:
    """Per-epoch log with shortest round-trip float formatting."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("epoch,loss,rsum,grad_dev,alpha\n")
        for e in epochs:
            fh.write(f"{e.epoch},{e.loss!r},{e.rsum!r},"
                     f"{e.grad_dev!r},{e.alpha!r}\n")
