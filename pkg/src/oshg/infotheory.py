"""Histogram entropies, mutual information, and the fusion ratio alpha.

All entropies here are discrete plug-in estimates in bits.  Scalars are
quantized into equal-width bins spanning their own sample range, and
probabilities come from the bin counts with no bin-width correction.
That choice is deliberate: a differential plug-in can go negative,
while the discrete form guarantees 0 <= I <= min(H(X), H(Y)) and hence
a fusion ratio

    alpha = 2 I(X; Y) / (H(X) + H(Y))

inside [0, 1].  Marginal entropies are derived from the same joint
table the MI uses, so the bound holds exactly (up to rounding), not
just in expectation.  Constant inputs have zero entropy; when both
marginals are zero the ratio is taken to be 1 (identical degenerate
variables share everything).

Matrix inputs to the MI are paired coordinate-wise: the sample set is
all (x[i, j], y[i, j]) pairs, which is how the dataset embedding and
the projected adapter output line up by construction.

Caption entropy is token-based: the unigram Shannon entropy of a
caption's tokens times its token count.  Appending tokens that are not
all duplicates of one symbol can only raise this quantity, which is
what makes synonym augmentation measurable.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dataio import tokenize
from .errors import ShapeError

__all__ = [
    "MiEstimate",
    "EntropyReport",
    "hist_entropy",
    "joint_mi",
    "nmi_alpha",
    "token_entropy_bits",
    "caption_bits",
    "modality_entropy_report",
    "report_to_json",
]

DEFAULT_BINS = 64


def _quantize(v: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bin indices over [min, max]; constant input -> bin 0."""
    lo = v.min()
    hi = v.max()
    if hi == lo:
        return np.zeros(v.shape, dtype=np.int64)
    idx = np.floor((v - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def _counts_entropy_bits(counts: np.ndarray) -> float:
    """Shannon entropy in bits of a count vector (plug-in, no correction)."""
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _check_samples(v, bins: int) -> np.ndarray:
    if bins < 2:
        raise ShapeError(f"need bins >= 2, got {bins}")
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise ShapeError("need at least one sample")
    if not np.all(np.isfinite(v)):
        raise ValueError("samples contain non-finite values")
    return v


def hist_entropy(samples, bins: int = DEFAULT_BINS) -> float:
    """Plug-in entropy (bits) of the equal-width histogram of the samples."""
    v = _check_samples(samples, bins)
    idx = _quantize(v, bins)
    return _counts_entropy_bits(np.bincount(idx, minlength=bins))


@dataclass(frozen=True)
class MiEstimate:
    """Joint-histogram MI with its marginals and the derived ratio."""

    mi_bits: float
    hx_bits: float
    hy_bits: float
    alpha: float
    bins: int
    sample_count: int


def joint_mi(x, y, bins: int = DEFAULT_BINS) -> MiEstimate:
    """I(X; Y) = H(X) + H(Y) - H(X, Y) from one joint histogram.

    x and y must have identical shape; every coordinate contributes one
    (x, y) pair.  Marginal counts are row/column sums of the joint
    table, so the plug-in identity 0 <= I <= min(H(X), H(Y)) holds.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape:
        raise ShapeError(f"paired inputs differ in shape: {xa.shape} vs {ya.shape}")
    x = _check_samples(xa, bins)
    y_flat = _check_samples(ya, bins)
    ix = _quantize(x, bins)
    iy = _quantize(y_flat, bins)
    joint = np.bincount(ix * bins + iy, minlength=bins * bins).reshape(bins, bins)
    hx = _counts_entropy_bits(joint.sum(axis=1))
    hy = _counts_entropy_bits(joint.sum(axis=0))
    hxy = _counts_entropy_bits(joint.ravel())
    mi = max(hx + hy - hxy, 0.0)
    if hx + hy > 0.0:
        alpha = min(max(2.0 * mi / (hx + hy), 0.0), 1.0)
    else:
        alpha = 1.0
    return MiEstimate(mi_bits=mi, hx_bits=hx, hy_bits=hy, alpha=alpha,
                      bins=bins, sample_count=int(x.size))


def nmi_alpha(x, y, bins: int = DEFAULT_BINS) -> float:
    """Fusion ratio alpha = 2 I / (H(X) + H(Y)), clamped to [0, 1]."""
    return joint_mi(x, y, bins).alpha


def token_entropy_bits(tokens) -> float:
    """Unigram Shannon entropy (bits) of a token sequence; empty -> 0."""
    counts = np.array(list(Counter(tokens).values()), dtype=np.float64)
    return _counts_entropy_bits(counts)


def caption_bits(texts) -> float:
    """Token-unigram entropy times token count over concatenated texts.

    ``texts`` is one caption's text, optionally followed by its
    synonyms; all tokens pool into a single unigram distribution.
    """
    tokens: list[str] = []
    for t in texts:
        tokens.extend(tokenize(t))
    return token_entropy_bits(tokens) * len(tokens)


@dataclass(frozen=True)
class EntropyReport:
    """Corpus-level entropy summary plus the per-caption breakdown."""

    text_bits: float
    augmented_text_bits: float
    image_bits: float
    bins: int
    alpha: float | None = None
    per_item: list = field(default_factory=list)


def modality_entropy_report(captions, image_feats,
                            bins: int = DEFAULT_BINS,
                            alpha: float | None = None) -> EntropyReport:
    """Mean caption bits, augmented caption bits, and image feature bits.

    Text bits average :func:`caption_bits` over the captions alone;
    augmented bits pool each caption with its synonym strings; image
    bits average :func:`hist_entropy` over feature rows.
    """
    if not captions:
        raise ShapeError("need a non-empty caption corpus")
    per_item = []
    text_vals = []
    aug_vals = []
    for rec in captions:
        tb = caption_bits([rec.text])
        ab = caption_bits([rec.text, *rec.synonyms])
        text_vals.append(tb)
        aug_vals.append(ab)
        per_item.append({
            "caption_id": rec.caption_id,
            "text_bits": tb,
            "augmented_text_bits": ab,
        })
    feats = np.asarray(image_feats, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise ShapeError("image features must be a non-empty 2-D matrix")
    image_vals = [hist_entropy(row, bins) for row in feats]
    return EntropyReport(
        text_bits=float(np.mean(text_vals)),
        augmented_text_bits=float(np.mean(aug_vals)),
        image_bits=float(np.mean(image_vals)),
        bins=bins,
        alpha=alpha,
        per_item=per_item,
    )


def report_to_json(report: EntropyReport, per_item: bool = False) -> str:
    """Serialize a report as stable JSON."""
    obj = {
        "text_bits": report.text_bits,
        "augmented_text_bits": report.augmented_text_bits,
        "image_bits": report.image_bits,
        "alpha": report.alpha,
        "bins": report.bins,
    }
    if per_item:
        obj["per_item"] = report.per_item
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"
