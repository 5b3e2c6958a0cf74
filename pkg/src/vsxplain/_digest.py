"""Content digests and canonical JSON used for caching and provenance.

Everything that feeds a cache key or a config digest goes through these
helpers so that identical content always produces identical keys.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and fixed separators (reorder-stable)."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=True, separators=(",", ":"))


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_text(text: str) -> str:
    return digest_bytes(text.encode("utf-8"))


def digest_json(obj: Any) -> str:
    return digest_text(canonical_json(obj))


def digest_array(arr: np.ndarray) -> str:
    """Digest dtype, shape and C-order bytes of an array."""
    a = np.ascontiguousarray(arr)
    h = hashlib.sha256()
    h.update(a.dtype.str.encode("ascii"))
    h.update(repr(a.shape).encode("ascii"))
    h.update(a.tobytes())
    return h.hexdigest()


def digest_file(path, chunk_size: int = 1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(chunk_size)
            if not chunk:
                break
            h.update(chunk)
    return h.hexdigest()


def seed_from(*parts: Any) -> int:
    """Derive a 63-bit RNG seed from arbitrary labeled parts."""
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big") >> 1
