"""Backend interfaces for the three model roles and validated op wrappers.

A backend implements the raw methods (``score_frames`` returning a vector,
``caption_clip`` returning text, ...). The module-level functions wrap those
methods with precondition checks, postcondition checks and domain types, and
are what the rest of the pipeline calls.
"""

from __future__ import annotations

from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .._digest import digest_json, digest_text
from ..errors import (
    BackendError,
    EmptyResponseError,
    InvalidInputError,
    UnsupportedCapabilityError,
)
from ..model import ImportanceScores, TextArtifact


@runtime_checkable
class SummarizerBackend(Protocol):
    id: str
    provides_attention: bool
    max_concurrency: int | None

    def score_frames(self, features: np.ndarray) -> np.ndarray: ...

    def attention_signal(self, features: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class CaptionerBackend(Protocol):
    id: str
    temperature: float
    max_concurrency: int | None

    def caption_clip(self, clip, prompt: str) -> str: ...

    def summarize_texts(self, descriptions: Sequence[str], prompt: str) -> str: ...


@runtime_checkable
class EmbedderBackend(Protocol):
    id: str
    dim: int
    max_concurrency: int | None

    def embed(self, text: str) -> np.ndarray: ...


def _check_features(features: np.ndarray) -> np.ndarray:
    feats = np.asarray(features)
    if feats.ndim != 2 or feats.size == 0:
        raise InvalidInputError(f"features must be a non-empty matrix, got {feats.shape}")
    if not np.all(np.isfinite(feats)):
        raise InvalidInputError("features contain non-finite values")
    return feats


def score_frames(
    backend: SummarizerBackend, features: np.ndarray, *, video_id: str = ""
) -> ImportanceScores:
    """One score per feature row, each in [0, 1]."""
    feats = _check_features(features)
    raw = np.asarray(backend.score_frames(feats), dtype=np.float64).ravel()
    if raw.size != feats.shape[0]:
        raise BackendError(
            backend.id, f"returned {raw.size} scores for {feats.shape[0]} frames"
        )
    if not np.all(np.isfinite(raw)) or np.any(raw < 0) or np.any(raw > 1):
        raise BackendError(backend.id, "scores outside [0, 1] or non-finite")
    return ImportanceScores(video_id=video_id, scores=raw)


def attention_signal(backend: SummarizerBackend, features: np.ndarray) -> np.ndarray:
    """Per-frame attention values from backends that expose them."""
    if not getattr(backend, "provides_attention", False):
        raise UnsupportedCapabilityError(backend.id, "backend provides no attention signal")
    feats = _check_features(features)
    raw = np.asarray(backend.attention_signal(feats), dtype=np.float64).ravel()
    if raw.size != feats.shape[0]:
        raise BackendError(
            backend.id, f"returned {raw.size} attention values for {feats.shape[0]} frames"
        )
    if not np.all(np.isfinite(raw)):
        raise BackendError(backend.id, "attention signal contains non-finite values")
    return raw


def caption_clip(
    backend: CaptionerBackend,
    clip,
    prompt: str,
    *,
    prompt_id: str,
    kind: str = "fragment_description",
) -> TextArtifact:
    """Describe a clip; deterministic at temperature 0 per (clip digest, prompt)."""
    if clip.frame_count < 1:
        raise InvalidInputError("clip is empty")
    if not prompt:
        raise InvalidInputError("prompt must be non-empty")
    text = backend.caption_clip(clip, prompt)
    if not isinstance(text, str):
        raise BackendError(backend.id, f"caption is {type(text).__name__}, not str")
    if not text:
        raise EmptyResponseError(backend.id, "captioner returned empty text")
    return TextArtifact(
        kind=kind, text=text, prompt_id=prompt_id, source_clip_digest=clip.digest
    )


def summarize_texts(
    backend: CaptionerBackend,
    descriptions: Sequence[str],
    prompt: str,
    *,
    prompt_id: str,
    kind: str = "merged_description",
) -> TextArtifact:
    """Merge one or more descriptions into a single text."""
    descriptions = list(descriptions)
    if not descriptions or any(not d for d in descriptions):
        raise InvalidInputError("need at least one non-empty description")
    if not prompt:
        raise InvalidInputError("prompt must be non-empty")
    text = backend.summarize_texts(descriptions, prompt)
    if not isinstance(text, str) or not text:
        raise EmptyResponseError(backend.id, "captioner returned empty merge")
    source = digest_json({"texts": descriptions, "prompt": digest_text(prompt)})
    return TextArtifact(kind=kind, text=text, prompt_id=prompt_id, source_clip_digest=source)


def embed_text(backend: EmbedderBackend, text: str) -> np.ndarray:
    """Fixed-length embedding of a non-empty text."""
    if not text:
        raise InvalidInputError("text must be non-empty")
    raw = np.asarray(backend.embed(text), dtype=np.float64).ravel()
    if raw.size != backend.dim:
        raise BackendError(backend.id, f"embedding has {raw.size} dims, declared {backend.dim}")
    if not np.all(np.isfinite(raw)):
        raise BackendError(backend.id, "embedding contains non-finite values")
    return raw
