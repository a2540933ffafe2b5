#!/usr/bin/env python3
"""Regenerate the bundled sample corpus under data/sample/.

Builds 50 synthetic scene images with 2 captions each (100 captions),
4 paraphrase synonyms per caption, and a feature row per image that
correlates with its captions' hash embeddings, so raw retrieval on the
sample is already better than chance and the adapters have signal to
improve.  Everything derives from one seed; rerunning the script
reproduces the same bytes.
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from oshg.dataio import (  # noqa: E402
    CaptionRecord,
    hash_embed,
    write_captions_jsonl,
    write_emb_file,
)
from oshg.matrix import Rng, l2_normalize_rows  # noqa: E402

N_IMAGES = 50
CAPS_PER_IMAGE = 2
N_SYNONYMS = 4
FEATURE_DIM = 24
SEED = 0

# each slot pairs a base word with paraphrases used for the synonyms
ADJECTIVES = [
    ("small", "little", "tiny", "compact", "miniature"),
    ("large", "big", "huge", "sizeable", "enormous"),
    ("old", "aged", "ancient", "weathered", "antique"),
    ("bright", "vivid", "luminous", "radiant", "gleaming"),
    ("quiet", "calm", "still", "peaceful", "silent"),
]
SUBJECTS = [
    ("dog", "hound", "puppy", "canine", "mutt"),
    ("cat", "feline", "kitten", "tabby", "mouser"),
    ("boat", "vessel", "dinghy", "craft", "skiff"),
    ("house", "home", "cottage", "dwelling", "bungalow"),
    ("tree", "oak", "sapling", "trunk", "elm"),
    ("bird", "sparrow", "finch", "songbird", "wren"),
    ("car", "automobile", "sedan", "vehicle", "coupe"),
    ("child", "kid", "youngster", "toddler", "youth"),
    ("market", "bazaar", "stall", "shop", "stand"),
    ("river", "stream", "creek", "brook", "channel"),
]
VERBS = [
    ("resting", "sitting", "lounging", "settled", "perched"),
    ("moving", "drifting", "gliding", "passing", "traveling"),
    ("standing", "waiting", "posing", "lingering", "stationed"),
    ("playing", "romping", "frolicking", "tumbling", "scampering"),
]
PLACES = [
    ("near the bridge", "by the bridge", "beside the bridge",
     "close to the bridge", "at the bridge"),
    ("in the garden", "within the garden", "among the flowerbeds",
     "inside the garden", "amid the garden"),
    ("on the shore", "along the shore", "at the waterline",
     "by the water", "on the beach"),
    ("under the sky", "beneath the clouds", "in the open air",
     "below the sky", "out in the open"),
    ("down the street", "along the road", "on the avenue",
     "along the lane", "down the boulevard"),
]


def pick(rng, rows):
    return rows[int(rng.integers(len(rows), 1)[0])]


def scene_words(rng):
    """One (adjective, subject, verb, place) tuple of paraphrase rows."""
    return (pick(rng, ADJECTIVES), pick(rng, SUBJECTS),
            pick(rng, VERBS), pick(rng, PLACES))


# word rows have period 5 and the frames period 3, so the first
# fifteen variants of a scene are pairwise distinct sentences
FRAMES = (
    "a {adj} {subj} {verb} {place}",
    "the {adj} {subj} {verb} {place}",
    "one {adj} {subj} {verb} {place}",
)


def phrase(scene, variant: int) -> str:
    adj, subj, verb, place = (row[variant % len(row)] for row in scene)
    return FRAMES[variant % len(FRAMES)].format(
        adj=adj, subj=subj, verb=verb, place=place)


def make_records(rng):
    records = []
    scenes = []
    for img in range(N_IMAGES):
        scene = scene_words(rng)
        scenes.append(scene)
        for cap in range(CAPS_PER_IMAGE):
            # captions of one image share the scene but start at
            # different paraphrase offsets; synonyms continue the cycle
            base = cap * (N_SYNONYMS + 1)
            records.append(CaptionRecord(
                caption_id=f"cap{img:03d}-{cap}",
                image_id=f"img{img:03d}",
                text=phrase(scene, base),
                synonyms=[phrase(scene, base + 1 + s)
                          for s in range(N_SYNONYMS)],
            ))
    return records, scenes


def make_image_features(records, rng):
    """Mean caption hash embedding per image plus mild noise."""
    sums = np.zeros((N_IMAGES, FEATURE_DIM), dtype=np.float64)
    counts = np.zeros(N_IMAGES, dtype=np.float64)
    for rec in records:
        row = int(rec.image_id[3:])
        sums[row] += hash_embed(rec.text, FEATURE_DIM, SEED)
        counts[row] += 1.0
    feats = sums / counts[:, None]
    feats += 0.25 * rng.normal(N_IMAGES, FEATURE_DIM)
    return l2_normalize_rows(feats)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=os.path.join(
        os.path.dirname(__file__), "..", "data", "sample"))
    args = parser.parse_args()

    rng = Rng(SEED)
    records, _ = make_records(rng.spawn(1))
    feats = make_image_features(records, rng.spawn(2))

    os.makedirs(args.out_dir, exist_ok=True)
    write_captions_jsonl(os.path.join(args.out_dir, "captions.jsonl"),
                         records)
    write_emb_file(os.path.join(args.out_dir, "images.emb"), feats)
    with open(os.path.join(args.out_dir, "images.ids"), "w",
              encoding="utf-8") as fh:
        for img in range(N_IMAGES):
            fh.write(f"img{img:03d}\n")
    print(f"wrote {len(records)} captions and {N_IMAGES} image rows "
          f"to {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
