"""Embedding and caption file formats, synonym padding, toy text embedder.

Two file formats live here.  EMB holds a float64 matrix: a text layout
(header line ``"<rows> <cols>"`` followed by that many rows of
space-separated decimals, LF endings) and a binary layout that starts
with the magic bytes ``EMB1``, repeats the same ASCII header line, and
then stores the values as little-endian binary64.  Captions travel as
JSONL with fields ``caption_id``, ``image_id``, ``text`` and an optional
``synonyms`` list.

The synonym helpers assemble the extended representation: a base vector
of dim ``b`` plus ``l`` synonym vectors of dim ``c`` fuse into a vector
of dim ``b + c`` whose first ``b`` entries are the base, bit for bit.
Missing synonym slots are zero vectors.  The ``l`` vectors compress into
one ``c``-dim block by element-wise mean (zero slots included), which is
order-invariant and degrades to pure padding when nothing was generated.

``hash_embed`` is a deterministic stand-in for a learned sentence
encoder: signed feature hashing of lowercased tokens, L2-normalized.
"""

from __future__ import annotations

import hashlib
import json
import string
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ShapeError

__all__ = [
    "CaptionRecord",
    "SynonymBundle",
    "parse_emb_file",
    "write_emb_file",
    "pad_synonyms",
    "extend_features",
    "build_bundle",
    "tokenize",
    "hash_embed",
    "embed_texts",
    "load_captions_jsonl",
    "write_captions_jsonl",
]

_EMB_MAGIC = b"EMB1"
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


@dataclass(frozen=True)
class CaptionRecord:
    """One caption: unique id, owning image id, text, synonym strings."""

    caption_id: str
    image_id: str
    text: str
    synonyms: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class SynonymBundle:
    """Base vector (dim b), padded synonym rows (l x c), fused vector (b+c)."""

    base: np.ndarray
    syn: np.ndarray
    fused: np.ndarray


def _format_row(row: np.ndarray) -> str:
    # repr() emits the shortest decimal that round-trips to the same
    # binary64, which is what makes write -> parse bit-identical.
    return " ".join(repr(float(v)) for v in row)


def write_emb_file(path, matrix, binary: bool = False) -> None:
    """Write a matrix in EMB format (text by default, EMB1 if ``binary``)."""
    m = np.ascontiguousarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"EMB files hold 2-D matrices, got shape {m.shape}")
    header = f"{m.shape[0]} {m.shape[1]}\n"
    if binary:
        with open(path, "wb") as fh:
            fh.write(_EMB_MAGIC)
            fh.write(header.encode("ascii"))
            fh.write(m.astype("<f8").tobytes())
    else:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(header)
            for row in m:
                fh.write(_format_row(row) + "\n")


def _parse_header(line: str, lineno: int) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2:
        raise DataError(f"header must be '<rows> <cols>', got {line!r}", lineno)
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise DataError(f"non-integer header field in {line!r}", lineno) from None
    if rows < 0 or cols < 0:
        raise DataError(f"negative dimension in header {line!r}", lineno)
    return rows, cols


def _parse_emb_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        fh.read(len(_EMB_MAGIC))
        header = bytearray()
        while True:
            ch = fh.read(1)
            if not ch:
                raise DataError("unterminated binary EMB header", 1)
            if ch == b"\n":
                break
            header += ch
        rows, cols = _parse_header(header.decode("ascii", "replace"), 1)
        payload = fh.read()
    want = rows * cols * 8
    if len(payload) != want:
        raise DataError(
            f"binary payload holds {len(payload)} bytes, header implies {want}", 2
        )
    m = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise DataError("binary EMB payload contains non-finite values", 2)
    return m


def parse_emb_file(path) -> np.ndarray:
    """Read an EMB file (text or EMB1 binary) into a float64 matrix.

    Malformed headers, row-count mismatches, non-numeric tokens, and
    NaN/Inf values raise :class:`DataError` carrying the line number.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(_EMB_MAGIC))
    if magic == _EMB_MAGIC:
        return _parse_emb_binary(path)

    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError("empty EMB file", 1)
    rows, cols = _parse_header(lines[0], 1)
    body = lines[1:]
    if len(body) < rows:
        raise DataError(f"expected {rows} data rows, file ends after {len(body)}",
                        len(lines))
    if len(body) > rows:
        raise DataError(f"expected {rows} data rows, found extra data", rows + 2)
    out = np.empty((rows, cols), dtype=np.float64)
    for i, line in enumerate(body):
        lineno = i + 2
        tokens = line.split()
        if len(tokens) != cols:
            raise DataError(f"expected {cols} values, got {len(tokens)}", lineno)
        for j, tok in enumerate(tokens):
            try:
                v = float(tok)
            except ValueError:
                raise DataError(f"non-numeric token {tok!r}", lineno) from None
            if not np.isfinite(v):
                raise DataError(f"non-finite value {tok!r}", lineno)
            out[i, j] = v
    return out


def pad_synonyms(syn_raw, l: int, c: int) -> np.ndarray:
    """Pad raw synonym vectors into an exact (l, c) block.

    Vectors shorter than ``c`` are right-padded with zeros; missing list
    slots become all-zero rows.  A vector longer than ``c`` or a list
    longer than ``l`` is an error.
    """
    if l < 0 or c < 1:
        raise ShapeError("need l >= 0 and c >= 1")
    if len(syn_raw) > l:
        raise ShapeError(f"{len(syn_raw)} synonym vectors exceed l={l}")
    out = np.zeros((l, c), dtype=np.float64)
    for i, raw in enumerate(syn_raw):
        v = np.asarray(raw, dtype=np.float64).ravel()
        if v.shape[0] > c:
            raise ShapeError(f"synonym vector dim {v.shape[0]} exceeds c={c}")
        out[i, : v.shape[0]] = v
    return out


def extend_features(base, syn) -> np.ndarray:
    """Fuse a base vector with its synonym block: concat(base, mean(syn)).

    ``syn`` is the (l, c) output of :func:`pad_synonyms`; the mean runs
    over the l rows with zero rows included.  The result has dim b + c
    and starts with ``base`` unchanged.
    """
    base = np.asarray(base, dtype=np.float64).ravel()
    syn = np.asarray(syn, dtype=np.float64)
    if syn.ndim != 2:
        raise ShapeError(f"synonym block must be 2-D, got shape {syn.shape}")
    reduced = syn.mean(axis=0) if syn.shape[0] > 0 else np.zeros(syn.shape[1])
    return np.concatenate([base, reduced])


def build_bundle(base, syn_raw, l: int, c: int) -> SynonymBundle:
    """Pad and fuse in one step, returning the full bundle."""
    base = np.asarray(base, dtype=np.float64).ravel()
    syn = pad_synonyms(syn_raw, l, c)
    return SynonymBundle(base=base, syn=syn, fused=extend_features(base, syn))


def tokenize(text: str) -> list[str]:
    """Lowercase, strip ASCII punctuation, split on Unicode whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()


def hash_embed(text: str, dim: int, seed: int) -> np.ndarray:
    """Signed feature hashing of a text into ``dim`` buckets, L2-normalized.

    Each token hashes (keyed blake2b, so the mapping depends only on the
    seed, never on interpreter state) to a bucket and a sign; counts
    accumulate and the result is normalized.  Empty text gives the zero
    vector.
    """
    if dim < 1:
        raise ShapeError("hash_embed needs dim >= 1")
    key = int(seed).to_bytes(8, "little", signed=False)
    vec = np.zeros(dim, dtype=np.float64)
    for tok in tokenize(text):
        digest = hashlib.blake2b(tok.encode("utf-8"), key=key, digest_size=9).digest()
        bucket = int.from_bytes(digest[:8], "little") % dim
        sign = 1.0 if digest[8] & 1 else -1.0
        vec[bucket] += sign
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0.0 else vec


def embed_texts(texts, dim: int, seed: int) -> np.ndarray:
    """Stack :func:`hash_embed` over a sequence of texts into (n, dim)."""
    return np.stack([hash_embed(t, dim, seed) for t in texts]) if len(texts) \
        else np.zeros((0, dim), dtype=np.float64)


def _require_str(obj: dict, key: str, lineno: int) -> str:
    if key not in obj:
        raise DataError(f"missing field {key!r}", lineno)
    v = obj[key]
    if not isinstance(v, str):
        raise DataError(f"field {key!r} must be a string", lineno)
    return v


def load_captions_jsonl(path) -> list[CaptionRecord]:
    """Read caption records from JSONL, enforcing caption_id uniqueness."""
    records: list[CaptionRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed JSON: {exc.msg}", lineno) from None
            if not isinstance(obj, dict):
                raise DataError("each line must hold a JSON object", lineno)
            cid = _require_str(obj, "caption_id", lineno)
            iid = _require_str(obj, "image_id", lineno)
            text = _require_str(obj, "text", lineno)
            syn = obj.get("synonyms", [])
            if not isinstance(syn, list) or not all(isinstance(s, str) for s in syn):
                raise DataError("field 'synonyms' must be a list of strings", lineno)
            if cid in seen:
                raise DataError(f"duplicate caption_id {cid!r}", lineno)
            seen.add(cid)
            records.append(CaptionRecord(cid, iid, text, list(syn)))
    return records


def write_captions_jsonl(path, records) -> None:
    """Write caption records as one compact JSON object per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            obj = {
                "caption_id": rec.caption_id,
                "image_id": rec.image_id,
                "text": rec.text,
            }
            if rec.synonyms:
                obj["synonyms"] = list(rec.synonyms)
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")
