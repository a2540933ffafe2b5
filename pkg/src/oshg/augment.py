"""Synonym generation for captions.

Two sources are supported.  Offline mode reads synonyms from a
pre-generated captions JSONL file, so the core pipeline never needs
network access.  HTTP mode posts the fixed prompt to a minimal JSON
completion endpoint:

    request:  POST {"prompt": str, "n": int}, content-type application/json
    response: {"completions": [str, ...]}

The endpoint contract is deliberately vendor-neutral; adapting a
specific completion API means translating this one pair of messages.
Responses are cached on disk keyed by (caption_id, l) so repeated runs
are reproducible without re-querying.  No path through this module ever
mutates the original caption text; synonyms are carried alongside it.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import threading
import urllib.error
import urllib.request
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .dataio import CaptionRecord, load_captions_jsonl
from .errors import AugmentError, ConfigError, DataError

__all__ = [
    "PROMPT_SUFFIX",
    "ENDPOINT_ENV",
    "TOKEN_ENV",
    "AugmentConfig",
    "build_prompt",
    "load_offline_synonyms",
    "generate_synonyms",
    "augment_records",
]

PROMPT_SUFFIX = ", Generate synonymous sentences"
ENDPOINT_ENV = "OSHG_LLM_ENDPOINT"
TOKEN_ENV = "OSHG_LLM_TOKEN"

MODES = ("offline", "http")

# cache writes are serialized; concurrent fetches may race to the same key
_CACHE_LOCK = threading.Lock()


@dataclass
class AugmentConfig:
    """How synonyms are produced.

    ``endpoint_url`` falls back to the OSHG_LLM_ENDPOINT environment
    variable; ``auth_token_env`` names the variable holding the bearer
    token (unset means unauthenticated).  ``l`` is the number of
    synonyms requested per caption, ``retries`` the number of extra
    attempts after the first request fails.
    """

    mode: str = "offline"
    endpoint_url: str = ""
    auth_token_env: str = TOKEN_ENV
    l: int = 4
    timeout_ms: int = 10_000
    retries: int = 2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown augment mode {self.mode!r}")
        if self.l < 1:
            raise ConfigError(f"l must be >= 1, got {self.l}")
        if self.timeout_ms < 1:
            raise ConfigError(f"timeout_ms must be >= 1, got {self.timeout_ms}")
        if self.retries < 0:
            raise ConfigError(f"retries must be >= 0, got {self.retries}")
        if self.mode == "http" and not self.resolved_endpoint():
            raise ConfigError(
                f"http mode needs endpoint_url or the {ENDPOINT_ENV} variable"
            )

    def resolved_endpoint(self) -> str:
        return self.endpoint_url or os.environ.get(ENDPOINT_ENV, "")

    def auth_token(self) -> str:
        return os.environ.get(self.auth_token_env, "") if self.auth_token_env else ""


def build_prompt(caption: str) -> str:
    """Return the completion prompt for one caption.

    The template is exactly "{}, Generate synonymous sentences"; the
    caption passes through verbatim, commas and unicode included.
    """
    if not caption:
        raise DataError("cannot build a prompt from an empty caption")
    return caption + PROMPT_SUFFIX


def load_offline_synonyms(path: str | os.PathLike) -> dict[str, list[str]]:
    """Load a captions JSONL file into a caption_id -> synonyms map."""
    return {rec.caption_id: list(rec.synonyms) for rec in load_captions_jsonl(path)}


def _cache_path(cache_dir: str, caption_id: str, l: int) -> str:
    # caption ids may hold arbitrary characters; hash them for the filename
    tag = hashlib.blake2b(caption_id.encode("utf-8"), digest_size=8).hexdigest()
    return os.path.join(cache_dir, f"{tag}-l{l}.json")


def _cache_load(cache_dir: str, caption_id: str, l: int) -> list[str] | None:
    path = _cache_path(cache_dir, caption_id, l)
    try:
        with open(path, encoding="utf-8") as fh:
            entry = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None
    syns = entry.get("synonyms") if isinstance(entry, dict) else None
    if not isinstance(syns, list) or not all(isinstance(s, str) for s in syns):
        return None
    return syns


def _cache_store(cache_dir: str, caption_id: str, l: int, synonyms: list[str]):
    with _CACHE_LOCK:
        os.makedirs(cache_dir, exist_ok=True)
        entry = {"caption_id": caption_id, "l": l, "synonyms": synonyms}
        with open(_cache_path(cache_dir, caption_id, l), "w", encoding="utf-8") as fh:
            json.dump(entry, fh, sort_keys=True)


def _parse_completions(body: bytes, limit: int) -> list[str]:
    try:
        payload = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise AugmentError(f"endpoint returned non-JSON body: {exc}") from exc
    if not isinstance(payload, dict) or "completions" not in payload:
        raise AugmentError('endpoint response lacks a "completions" field')
    comps = payload["completions"]
    if not isinstance(comps, list) or not all(isinstance(c, str) for c in comps):
        raise AugmentError('"completions" must be a list of strings')
    return comps[:limit]


def _http_fetch(cfg: AugmentConfig, prompt: str) -> list[str]:
    url = cfg.resolved_endpoint()
    body = json.dumps({"prompt": prompt, "n": cfg.l}).encode("utf-8")
    headers = {"Content-Type": "application/json"}
    token = cfg.auth_token()
    if token:
        headers["Authorization"] = f"Bearer {token}"
    last: Exception | None = None
    for _ in range(cfg.retries + 1):
        req = urllib.request.Request(url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=cfg.timeout_ms / 1000.0) as resp:
                return _parse_completions(resp.read(), cfg.l)
        except (urllib.error.URLError, ConnectionError, TimeoutError, OSError) as exc:
            last = exc
    raise AugmentError(
        f"completion request failed after {cfg.retries + 1} attempts: {last}"
    ) from last


def generate_synonyms(
    cfg: AugmentConfig,
    caption: str,
    caption_id: str | None = None,
    source: dict[str, list[str]] | None = None,
    cache_dir: str | os.PathLike | None = None,
) -> list[str]:
    """Return at most ``cfg.l`` synonym strings for one caption.

    Offline mode looks ``caption_id`` up in ``source`` (a map produced
    by :func:`load_offline_synonyms`); a miss degrades to an empty list
    with a warning, which downstream padding turns into all-zero slots.
    HTTP mode builds the prompt, posts it, and caches the parsed
    completions under (caption_id, l) when both an id and a cache
    directory are given.
    """
    if cfg.mode == "offline":
        if source is None:
            raise ConfigError("offline mode needs a synonyms source map")
        if caption_id is None:
            raise ConfigError("offline mode needs the caption_id to look up")
        syns = source.get(caption_id)
        if not syns:
            warnings.warn(
                f"no synonyms for caption id {caption_id!r}; using an empty list",
                stacklevel=2,
            )
            return []
        return list(syns)[: cfg.l]

    if caption_id is not None and cache_dir is not None:
        cached = _cache_load(os.fspath(cache_dir), caption_id, cfg.l)
        if cached is not None:
            return cached
    syns = _http_fetch(cfg, build_prompt(caption))
    if caption_id is not None and cache_dir is not None:
        _cache_store(os.fspath(cache_dir), caption_id, cfg.l, syns)
    return syns


def augment_records(
    records: list[CaptionRecord],
    cfg: AugmentConfig,
    source: dict[str, list[str]] | None = None,
    cache_dir: str | os.PathLike | None = None,
    max_in_flight: int = 4,
) -> list[CaptionRecord]:
    """Return new caption records with synonyms filled in.

    The inputs are never modified.  HTTP requests run concurrently up
    to ``max_in_flight``; output order always matches input order.
    """
    if max_in_flight < 1:
        raise ConfigError(f"max_in_flight must be >= 1, got {max_in_flight}")

    def fetch(rec: CaptionRecord) -> list[str]:
        return generate_synonyms(
            cfg, rec.text, caption_id=rec.caption_id,
            source=source, cache_dir=cache_dir,
        )

    if cfg.mode == "http" and len(records) > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            all_syns = list(pool.map(fetch, records))
    else:
        all_syns = [fetch(rec) for rec in records]
    return [
        dataclasses.replace(rec, synonyms=syns)
        for rec, syns in zip(records, all_syns)
    ]
