"""Visual codebooks, hard-assignment similarity, and R@K evaluation.

An image is a small codebook of region vectors.  A word (or a whole
caption embedded as one vector) scores against an image in two
algebraically equal ways:

  * attention route: cosine against every region, a one-hot attention
    vector at the argmax (ties to the lowest region index), the
    attended region reconstructed as the weighted sum, and a final
    cosine against that attended vector;
  * max route: the maximum of the per-region cosines.

The one-hot weights make the weighted sum collapse onto the argmax
region, so both routes must agree; ``word_similarity`` computes both
and asserts agreement to 1e-12 on every call rather than trusting the
simplification.  All-zero vectors take cosine 0 by convention.

Evaluation follows the standard two-direction protocol.  Text-to-image:
a caption scores hit@k when its ground-truth image ranks in the top k.
Image-to-text: an image scores hit@k when any of its ground-truth
captions does (datasets pair several captions per image).  Ranking ties
break toward the lower item index so shuffled inputs reproduce the same
report.  Recalls are percentages and RSUM is the sum of all six.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError
from .matrix import as_matrix, cosine_similarity_matrix

__all__ = [
    "ImageCodebook",
    "EvalReport",
    "hard_assign",
    "word_similarity",
    "sentence_similarity",
    "pool_regions",
    "score_matrix",
    "rank_of",
    "evaluate",
    "report_json",
    "format_report_table",
]

AGGREGATIONS = ("mean", "logsumexp")


@dataclass(frozen=True)
class ImageCodebook:
    """Region vectors for one image, shape (K_regions, d)."""

    image_id: str
    regions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "regions", as_matrix(self.regions, "regions"))
        if self.regions.shape[0] < 1:
            raise ShapeError("a codebook needs at least one region")


def hard_assign(sim_row) -> tuple[np.ndarray, int]:
    """One-hot attention over a similarity row; ties take the lowest index."""
    sims = np.asarray(sim_row, dtype=np.float64).ravel()
    if sims.size < 1:
        raise ShapeError("need at least one similarity")
    if not np.all(np.isfinite(sims)):
        raise ValueError("similarities contain non-finite values")
    idx = int(np.argmax(sims))
    weights = np.zeros(sims.size, dtype=np.float64)
    weights[idx] = 1.0
    return weights, idx


def word_similarity(t, codebook: ImageCodebook) -> float:
    """Similarity of one vector to an image: max over region cosines.

    Runs the attention route and the max route and insists they agree;
    a drift between them would mean the one-hot simplification no
    longer holds.
    """
    t = np.asarray(t, dtype=np.float64).ravel()
    if t.shape[0] != codebook.regions.shape[1]:
        raise ShapeError(
            f"vector dim {t.shape[0]} vs region dim {codebook.regions.shape[1]}"
        )
    sims = cosine_similarity_matrix(t[None, :], codebook.regions)[0]
    weights, idx = hard_assign(sims)
    attended = weights @ codebook.regions
    via_attention = float(cosine_similarity_matrix(t[None, :], attended[None, :])[0, 0])
    via_max = float(sims.max())
    if abs(via_attention - via_max) > 1e-12:
        raise AssertionError(
            f"attention route {via_attention!r} != max route {via_max!r}"
        )
    return via_max


def sentence_similarity(words, codebook: ImageCodebook, agg: str = "mean") -> float:
    """Aggregate per-word similarities over a sentence.

    "mean" averages; "logsumexp" applies a smooth max, shifted by
    log(L) so duplicated words leave the score unchanged.
    """
    words = as_matrix(words, "words")
    if words.shape[0] < 1:
        raise ShapeError("need at least one word")
    if agg not in AGGREGATIONS:
        raise ShapeError(f"unknown aggregation {agg!r}; choose from {AGGREGATIONS}")
    scores = np.array([word_similarity(w, codebook) for w in words])
    if agg == "mean":
        return float(scores.mean())
    from scipy.special import logsumexp

    return float(logsumexp(scores) - np.log(scores.size))


def pool_regions(codebooks, mode: str = "max") -> np.ndarray:
    """Collapse each codebook to one vector (element-wise max or mean)."""
    if mode not in ("max", "mean"):
        raise ShapeError(f"unknown pooling mode {mode!r}")
    rows = []
    for cb in codebooks:
        rows.append(cb.regions.max(axis=0) if mode == "max"
                    else cb.regions.mean(axis=0))
    return np.stack(rows)


def score_matrix(captions, images) -> np.ndarray:
    """(n_captions, n_images) similarity matrix.

    ``images`` is either a pooled (n_images, d) matrix (plain cosine)
    or a list of codebooks (max-over-regions per pair).
    """
    captions = as_matrix(captions, "captions")
    if isinstance(images, np.ndarray) or (
        not isinstance(images, (list, tuple))
    ):
        return cosine_similarity_matrix(captions, as_matrix(images, "images"))
    out = np.empty((captions.shape[0], len(images)), dtype=np.float64)
    for j, cb in enumerate(images):
        for i in range(captions.shape[0]):
            out[i, j] = word_similarity(captions[i], cb)
    return out


def rank_of(scores: np.ndarray, target: int) -> int:
    """1-based rank of ``target`` under descending score, lower index
    winning ties."""
    s = scores[target]
    better = int(np.sum(scores > s))
    tied_before = int(np.sum(scores[:target] == s))
    return 1 + better + tied_before


@dataclass(frozen=True)
class EvalReport:
    """Recalls (percent) in both directions plus their sum."""

    i2t_r1: float
    i2t_r5: float
    i2t_r10: float
    t2i_r1: float
    t2i_r5: float
    t2i_r10: float
    rsum: float


def evaluate(images, captions, caption_to_image, ks=(1, 5, 10)) -> EvalReport:
    """Two-direction retrieval recalls over a scored corpus.

    ``caption_to_image`` lists, per caption row, the index of its
    ground-truth image; several captions may share an image.
    """
    scores = score_matrix(captions, images)
    n_cap, n_img = scores.shape
    owner = np.asarray(caption_to_image, dtype=np.int64).ravel()
    if owner.shape[0] != n_cap:
        raise DataError(
            f"caption_to_image has {owner.shape[0]} entries for {n_cap} captions"
        )
    if n_cap and (owner.min() < 0 or owner.max() >= n_img):
        raise DataError("caption_to_image points at a missing image")

    # t2i: rank of the ground-truth image within each caption's row.
    t2i_ranks = np.array(
        [rank_of(scores[i], int(owner[i])) for i in range(n_cap)]
    )
    # i2t: best ground-truth caption rank within each image's column.
    i2t_ranks = np.full(n_img, np.inf)
    for j in range(n_img):
        col = scores[:, j]
        mine = np.flatnonzero(owner == j)
        if mine.size:
            i2t_ranks[j] = min(rank_of(col, int(i)) for i in mine)
    counted = np.isfinite(i2t_ranks)
    n_counted = int(counted.sum())
    if n_counted == 0:
        raise DataError("no image has a ground-truth caption")

    def recall(ranks, k, denom):
        return 100.0 * float(np.sum(ranks <= k)) / denom

    i2t = [recall(i2t_ranks[counted], k, n_counted) for k in ks]
    t2i = [recall(t2i_ranks, k, n_cap) for k in ks]
    return EvalReport(
        i2t_r1=i2t[0], i2t_r5=i2t[1], i2t_r10=i2t[2],
        t2i_r1=t2i[0], t2i_r5=t2i[1], t2i_r10=t2i[2],
        rsum=sum(i2t) + sum(t2i),
    )


def report_json(report: EvalReport) -> str:
    obj = {
        "i2t": {"r1": report.i2t_r1, "r5": report.i2t_r5, "r10": report.i2t_r10},
        "t2i": {"r1": report.t2i_r1, "r5": report.t2i_r5, "r10": report.t2i_r10},
        "rsum": report.rsum,
    }
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def format_report_table(report: EvalReport) -> str:
    """Aligned text table: i2t R@1/5/10, t2i R@1/5/10, RSUM."""
    head = f"{'':8s}{'R@1':>8s}{'R@5':>8s}{'R@10':>8s}"
    i2t = (f"{'i2t':8s}{report.i2t_r1:8.2f}{report.i2t_r5:8.2f}"
           f"{report.i2t_r10:8.2f}")
    t2i = (f"{'t2i':8s}{report.t2i_r1:8.2f}{report.t2i_r5:8.2f}"
           f"{report.t2i_r10:8.2f}")
    return "\n".join([head, i2t, t2i, f"{'RSUM':8s}{report.rsum:8.2f}"])
