"""
Synonym augmentation: prompt, lookup, and the entropy payoff
============================================================

Captions gain synonym lists either from a completion endpoint (http
mode, one POST per caption with a fixed prompt template) or from a
pre-augmented file (offline mode).  This demo runs the offline path
against the bundled sample, shows the exact prompt the http path would
send, and measures how much token entropy the synonyms add.
"""

import os
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from oshg import (
    AugmentConfig,
    CaptionRecord,
    augment_records,
    build_prompt,
    load_captions_jsonl,
    load_offline_synonyms,
    modality_entropy_report,
    parse_emb_file,
)

HERE = os.path.dirname(__file__)
SAMPLE = os.path.join(HERE, "..", "data", "sample")

# the http path sends this prompt verbatim, commas and all, and asks
# for l completions back; the caption text itself is never modified
caption = "a small dog resting near the bridge"
print(f"prompt sent for {caption!r}:")
print(f"  {build_prompt(caption)!r}")

# offline mode replays synonyms recorded in an augmented captions file
records = load_captions_jsonl(os.path.join(SAMPLE, "captions.jsonl"))
feats = parse_emb_file(os.path.join(SAMPLE, "images.emb"))
bare = [CaptionRecord(r.caption_id, r.image_id, r.text, []) for r in records]
source = load_offline_synonyms(os.path.join(SAMPLE, "captions.jsonl"))

config = AugmentConfig(mode="offline", l=4)
with tempfile.TemporaryDirectory() as cache:
    augmented = augment_records(bare, config, source=source,
                                cache_dir=cache)

filled = sum(1 for r in augmented if r.synonyms)
print(f"\naugmented {len(augmented)} captions, {filled} got synonyms")
print(f"first caption: {augmented[0].text!r}")
for syn in augmented[0].synonyms:
    print(f"  synonym: {syn!r}")
print("original texts untouched: "
      f"{[r.text for r in augmented] == [r.text for r in bare]}")

# synonyms widen the vocabulary, so the pooled token entropy of
# caption-plus-synonyms exceeds the caption-only entropy
before = modality_entropy_report(bare, feats)
after = modality_entropy_report(augmented, feats)
print(f"\ntext bits without synonyms: {before.augmented_text_bits:.1f}")
print(f"text bits with synonyms:    {after.augmented_text_bits:.1f}")
print(f"entropy gained: "
      f"{after.augmented_text_bits - before.augmented_text_bits:.1f} bits")
