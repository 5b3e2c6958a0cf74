"""Deterministic in-process backends.

These are part of the public test API: every downstream property test is
written against their contracts.

* ``PlantedSummarizer`` scores the frames of one "planted" fragment 0.9 and
  everything else 0.1, but only while that fragment's rows still carry
  signal (any non-zero value); zeroing them removes the 0.9 response.
* ``MockCaptioner`` emits ``MOCK(<clip digest prefix>,<prompt digest
  prefix>): objects o3,o7`` where the object ids are derived from the clip's
  frame digests, and merges descriptions by unioning their object ids.
* ``HashedBagEmbedder`` maps the set of tokens in a text to hashed buckets;
  token order never matters and disjoint vocabularies give orthogonal
  vectors (up to bucket collisions, which the fixed hash makes stable).

All outputs are pure functions of the inputs. Instances count their raw
calls so cache audits can assert a warm rerun hits the backend zero times.
"""

from __future__ import annotations

import hashlib
import re
from typing import Sequence

import numpy as np

from .._digest import digest_json, digest_text

_OBJECT_ID_SPACE = 47
_OBJECT_RE = re.compile(r"\bo(\d+)\b")


def _frame_object_id(frame_digest: str) -> int:
    return int(frame_digest[:8], 16) % _OBJECT_ID_SPACE


class PlantedSummarizer:
    """Summarizer with one known influential fragment."""

    def __init__(
        self,
        fragments: tuple[tuple[int, int], ...],
        planted_index: int,
        hi: float = 0.9,
        lo: float = 0.1,
        provides_attention: bool = True,
    ):
        if not (0 <= planted_index < len(fragments)):
            raise ValueError(f"planted_index {planted_index} out of range")
        self.fragments = tuple((int(s), int(e)) for s, e in fragments)
        self.planted_index = int(planted_index)
        self.hi = float(hi)
        self.lo = float(lo)
        self.provides_attention = provides_attention
        self.max_concurrency = None
        self.n_score_calls = 0
        self.n_attention_calls = 0
        frag_digest = digest_json([list(f) for f in self.fragments])
        self.id = f"mock-planted(j={planted_index})@{frag_digest[:8]}"

    def _pattern(self, features: np.ndarray, hi: float, lo: float) -> np.ndarray:
        out = np.full(features.shape[0], lo, dtype=np.float64)
        start, end = self.fragments[self.planted_index]
        if np.any(features[start:end] != 0):
            out[start:end] = hi
        return out

    def score_frames(self, features: np.ndarray) -> np.ndarray:
        self.n_score_calls += 1
        return self._pattern(features, self.hi, self.lo)

    def attention_signal(self, features: np.ndarray) -> np.ndarray:
        self.n_attention_calls += 1
        return self._pattern(features, self.hi, self.lo)


class ConstantSummarizer:
    """Returns the same score for every frame; attention is uniform too."""

    def __init__(self, value: float = 0.5, provides_attention: bool = True):
        self.value = float(value)
        self.provides_attention = provides_attention
        self.max_concurrency = None
        self.n_score_calls = 0
        self.n_attention_calls = 0
        self.id = f"mock-constant(v={self.value})"

    def score_frames(self, features: np.ndarray) -> np.ndarray:
        self.n_score_calls += 1
        return np.full(features.shape[0], self.value, dtype=np.float64)

    def attention_signal(self, features: np.ndarray) -> np.ndarray:
        self.n_attention_calls += 1
        return np.full(features.shape[0], self.value, dtype=np.float64)


class MockCaptioner:
    id = "mock-captioner"

    def __init__(self):
        self.temperature = 0.0
        self.max_concurrency = None
        self.n_caption_calls = 0
        self.n_merge_calls = 0

    @staticmethod
    def _object_ids(clip) -> list[int]:
        return sorted({_frame_object_id(fd) for fd in clip.frame_digests})

    def caption_clip(self, clip, prompt: str) -> str:
        self.n_caption_calls += 1
        ids = ",".join(f"o{i}" for i in self._object_ids(clip))
        return f"MOCK({clip.digest[:8]},{digest_text(prompt)[:4]}): objects {ids}"

    def summarize_texts(self, descriptions: Sequence[str], prompt: str) -> str:
        self.n_merge_calls += 1
        ids: set[int] = set()
        for text in descriptions:
            found = _OBJECT_RE.findall(text)
            if found:
                ids.update(int(i) for i in found)
            else:
                # arbitrary text: derive one stable pseudo-object per input
                ids.add(int(digest_text(text)[:8], 16) % _OBJECT_ID_SPACE)
        joined = ",".join(f"o{i}" for i in sorted(ids))
        return f"MOCK-MERGE({digest_text(prompt)[:4]}): objects {joined}"


class HashedBagEmbedder:
    """Order-free bag-of-tokens embedding with a stable token hash."""

    _token_re = re.compile(r"[0-9a-z]+")

    def __init__(self, id: str = "mock-bow-a", dim: int = 384, salt: str = "a"):
        self.id = id
        self.dim = int(dim)
        self.salt = salt
        self.max_concurrency = None
        self.n_embed_calls = 0

    def _bucket(self, token: str) -> int:
        h = hashlib.sha256(f"{self.salt}|{token}".encode("utf-8")).digest()
        return int.from_bytes(h[:8], "big") % self.dim

    def embed(self, text: str) -> np.ndarray:
        self.n_embed_calls += 1
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in set(self._token_re.findall(text.lower())):
            vec[self._bucket(token)] = 1.0
        return vec


def default_mock_embedders() -> tuple[HashedBagEmbedder, HashedBagEmbedder]:
    """The two embedders a mock pipeline run reports, one column each."""
    return (
        HashedBagEmbedder("mock-bow-a", dim=384, salt="a"),
        HashedBagEmbedder("mock-bow-b", dim=512, salt="b"),
    )
