"""
Adapter training with verified gradients
========================================

Train the hypergraph adapters on the bundled sample for a handful of
epochs, watch the triplet loss fall and the recall sum rise, then hold
the hand-written gradients against central finite differences.  The
same check runs inside the trainer every epoch in a cheaper form (the
dataset-route versus batch-route deviation); here it runs in full.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from oshg import (
    Rng,
    TrainConfig,
    build_corpus,
    finite_diff_check,
    load_captions_jsonl,
    parse_emb_file,
    train,
)

HERE = os.path.dirname(__file__)
SAMPLE = os.path.join(HERE, "..", "data", "sample")

records = load_captions_jsonl(os.path.join(SAMPLE, "captions.jsonl"))
feats = parse_emb_file(os.path.join(SAMPLE, "images.emb"))
ids = [line.strip() for line
       in open(os.path.join(SAMPLE, "images.ids"), encoding="utf-8")]
corpus = build_corpus(records, ids, feats, b=feats.shape[1], c=16, l=4,
                      seed=0)

# alpha from normalized mutual information, beta following alpha; the
# learning rate is modest because the loss sums over positive pairs
config = TrainConfig(epochs=8, batch=25, lr=0.005, seed=0,
                     alpha_mode="nmi", l=4)
result = train(config, corpus)
print("epoch   loss      rsum    alpha   grad_dev")
for ep in result.epochs:
    print(f"{ep.epoch:3d} {ep.loss:9.4f} {ep.rsum:9.1f} "
          f"{ep.alpha:8.4f} {ep.grad_dev:10.5f}")

first, last = result.epochs[0], result.epochs[-1]
print(f"\nloss moved {first.loss:.3f} -> {last.loss:.3f}, "
      f"rsum {first.rsum:.0f} -> {last.rsum:.0f}")

# finite-difference verification on the trained parameters: for each
# block, sampled coordinates are nudged by +/-h and the secant slope
# is compared to the analytic entry; coordinates too close to a hinge
# or ReLU kink are excluded rather than misjudged
model = result.model
batch = Rng(0).spawn(99).choice(corpus.n_captions, 40)
report = finite_diff_check(model, batch, h=1e-6, tol=1e-4,
                           coords_per_block=20, seed=0)
print("\nblock           max rel err   checked  excluded")
for name in sorted(report.block_errors):
    print(f"{name:14s} {report.block_errors[name]:12.3e} "
          f"{report.checked[name]:8d} {report.excluded[name]:9d}")
print(f"gradient check passed: {report.passed}")
