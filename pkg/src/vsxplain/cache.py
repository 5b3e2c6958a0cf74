"""Content-addressed, write-once cache for backend responses.

Entries live as flat ``<key>.bin`` files next to an append-only
``index.jsonl`` with creation telemetry. Keys digest the backend id, the
operation and the payload digests, so replaying a run with a warm cache
never touches a backend.
"""

from __future__ import annotations

import io
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from ._digest import digest_json, digest_text
from .errors import CacheIntegrityError

INDEX_NAME = "index.jsonl"


def make_key(
    backend_id: str, op: str, payload_digest: str, prompt_digest: str | None = None
) -> str:
    parts = {"backend": backend_id, "op": op, "payload": payload_digest}
    if prompt_digest is not None:
        parts["prompt"] = prompt_digest
    return digest_json(parts)


class CacheStore:
    """Directory-backed byte store; get-after-put is byte-exact."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        if not key or any(c not in "0123456789abcdef" for c in key):
            raise CacheIntegrityError(f"invalid cache key {key!r}")
        return self.root / f"{key}.bin"

    def get(self, key: str) -> bytes | None:
        path = self._path(key)
        if not path.exists():
            return None
        return path.read_bytes()

    def put(self, key: str, data: bytes) -> None:
        if not isinstance(data, bytes):
            raise CacheIntegrityError("cache values must be bytes")
        path = self._path(key)
        with self._lock:
            if path.exists():
                if path.read_bytes() != data:
                    raise CacheIntegrityError(f"key {key} rewritten with different bytes")
                return
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.rename(path)
            entry = {
                "key": key,
                "created_at": datetime.now(timezone.utc).isoformat(),
                "size": len(data),
            }
            with open(self.root / INDEX_NAME, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


def cache_get(store: CacheStore, key: str) -> bytes | None:
    return store.get(key)


def cache_put(store: CacheStore, key: str, data: bytes) -> None:
    store.put(key, data)


def _array_to_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def _array_from_bytes(data: bytes) -> np.ndarray:
    return np.load(io.BytesIO(data), allow_pickle=False)


@dataclass
class CachedSummarizer:
    """Summarizer proxy that answers repeated inputs from the store."""

    inner: object
    store: CacheStore

    def __post_init__(self):
        self.id = self.inner.id
        self.provides_attention = getattr(self.inner, "provides_attention", False)
        self.max_concurrency = getattr(self.inner, "max_concurrency", None)

    def _cached_vector(self, op: str, features: np.ndarray) -> np.ndarray:
        from ._digest import digest_array

        key = make_key(self.id, op, digest_array(np.asarray(features)))
        hit = self.store.get(key)
        if hit is not None:
            return _array_from_bytes(hit)
        result = np.asarray(getattr(self.inner, op)(features), dtype=np.float64)
        self.store.put(key, _array_to_bytes(result))
        return result

    def score_frames(self, features: np.ndarray) -> np.ndarray:
        return self._cached_vector("score_frames", features)

    def attention_signal(self, features: np.ndarray) -> np.ndarray:
        return self._cached_vector("attention_signal", features)


@dataclass
class CachedCaptioner:
    inner: object
    store: CacheStore

    def __post_init__(self):
        self.id = self.inner.id
        self.temperature = getattr(self.inner, "temperature", 0.0)
        self.max_concurrency = getattr(self.inner, "max_concurrency", None)

    def caption_clip(self, clip, prompt: str) -> str:
        key = make_key(self.id, "caption_clip", clip.digest, digest_text(prompt))
        hit = self.store.get(key)
        if hit is not None:
            return hit.decode("utf-8")
        text = self.inner.caption_clip(clip, prompt)
        self.store.put(key, text.encode("utf-8"))
        return text

    def summarize_texts(self, descriptions: Sequence[str], prompt: str) -> str:
        key = make_key(
            self.id,
            "summarize_texts",
            digest_json(list(descriptions)),
            digest_text(prompt),
        )
        hit = self.store.get(key)
        if hit is not None:
            return hit.decode("utf-8")
        text = self.inner.summarize_texts(descriptions, prompt)
        self.store.put(key, text.encode("utf-8"))
        return text


@dataclass
class CachedEmbedder:
    inner: object
    store: CacheStore

    def __post_init__(self):
        self.id = self.inner.id
        self.dim = self.inner.dim
        self.max_concurrency = getattr(self.inner, "max_concurrency", None)

    def embed(self, text: str) -> np.ndarray:
        key = make_key(self.id, "embed_text", digest_text(text))
        hit = self.store.get(key)
        if hit is not None:
            return _array_from_bytes(hit)
        result = np.asarray(self.inner.embed(text), dtype=np.float64)
        self.store.put(key, _array_to_bytes(result))
        return result
