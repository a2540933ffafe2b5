"""
Swapping the text-side kernel: pooling, pairwise graph, hypergraph
==================================================================

The text adapter's propagation step is pluggable.  Besides the
hypergraph operator, three baselines drop into the same slot: average
pooling and max pooling over each vertex's neighborhood (no trainable
text parameters), and a pairwise-graph convolution over the binary
symmetrized KNN graph (linear, one trainable projection).  This demo
applies each kernel directly to a feature matrix, then trains all four
variants on the bundled sample and compares final recall sums.
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from oshg import (
    Rng,
    TrainConfig,
    baseline_adapt,
    build_corpus,
    load_captions_jsonl,
    parse_emb_file,
    train,
)

HERE = os.path.dirname(__file__)
SAMPLE = os.path.join(HERE, "..", "data", "sample")

# the kernels share one signature: features in, same-shape features out
rng = Rng(5)
f = rng.normal(10, 4)
for kind in ("avg_pool", "max_pool", "pairwise_graph", "hypergraph"):
    out = baseline_adapt(kind, f, knn_k=3)
    print(f"{kind:15s} output shape {out.shape}, "
          f"mean |change| {np.mean(np.abs(out - f)):.3f}")

# with k=0 the pooling kernels reduce to the identity
identity = baseline_adapt("avg_pool", f, knn_k=0)
print(f"\navg_pool with k=0 is the identity: "
      f"{bool(np.array_equal(identity, f))}")

# train the full model once per kernel on the bundled sample
records = load_captions_jsonl(os.path.join(SAMPLE, "captions.jsonl"))
feats = parse_emb_file(os.path.join(SAMPLE, "images.emb"))
ids = [line.strip() for line
       in open(os.path.join(SAMPLE, "images.ids"), encoding="utf-8")]
corpus = build_corpus(records, ids, feats, b=feats.shape[1], c=16, l=4,
                      seed=0)

print("\nkernel          final loss  final rsum")
for kind in ("hypergraph", "pairwise_graph", "avg_pool", "max_pool"):
    config = TrainConfig(epochs=6, batch=25, lr=0.005, seed=0,
                         alpha_mode="nmi", l=4, kernel=kind)
    result = train(config, corpus)
    last = result.epochs[-1]
    print(f"{kind:15s} {last.loss:10.4f} {last.rsum:11.1f}")
