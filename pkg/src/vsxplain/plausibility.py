"""Plausibility of an explanation: semantic overlap between its description
and the summary's description, one cosine per embedder.

Raw cosines live in [-1, 1]; the reported score clamps at zero so the
published range is [0, 1]. Both values are kept so either convention can be
recovered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .backends import base as backends
from .errors import BackendError, InvalidInputError, UndefinedSimilarityError, ValidationError
from .model import APPROACH_IDS, TextArtifact


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two non-zero vectors, clamped to [-1, 1]."""
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    if x.size != y.size or x.size == 0:
        raise InvalidInputError(f"length mismatch: {x.size} vs {y.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("cosine inputs must be finite")
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        raise UndefinedSimilarityError("cosine similarity undefined for zero vectors")
    if np.array_equal(x, y):
        return 1.0
    value = float(np.dot(x, y) / (nx * ny))
    return min(1.0, max(-1.0, value))


class EmbedderScore(NamedTuple):
    raw_cosine: float
    reported: float


@dataclass(frozen=True)
class PlausibilityResult:
    """Per-embedder overlap between one explanation text and one summary text."""

    video_id: str
    explainer_id: str
    approach_id: str
    per_embedder: Mapping[str, EmbedderScore]
    errors: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "per_embedder", dict(self.per_embedder))
        object.__setattr__(self, "errors", dict(self.errors))
        if self.approach_id not in APPROACH_IDS:
            raise ValidationError(f"unknown approach_id {self.approach_id!r}")
        for emb, score in self.per_embedder.items():
            if not (math.isfinite(score.raw_cosine) and math.isfinite(score.reported)):
                raise ValidationError(f"non-finite plausibility for {emb}")
            if not (-1.0 <= score.raw_cosine <= 1.0):
                raise ValidationError(f"raw cosine for {emb} outside [-1, 1]")
            if score.reported != max(score.raw_cosine, 0.0):
                raise ValidationError(f"reported score for {emb} is not max(raw, 0)")

    def reported_map(self) -> dict[str, float]:
        return {emb: s.reported for emb, s in self.per_embedder.items()}


def plausibility_score(
    embedders: Sequence[backends.EmbedderBackend],
    explanation: TextArtifact,
    summary: TextArtifact,
    *,
    video_id: str = "",
    explainer_id: str = "",
    approach_id: str = "not_applicable",
) -> PlausibilityResult:
    """Cosine overlap of the two texts under every embedder.

    One embedder failing does not void the others; its error is recorded
    under its id instead.
    """
    if not explanation.text or not summary.text:
        raise InvalidInputError("both texts must be non-empty")
    if not embedders:
        raise InvalidInputError("need at least one embedder")
    scores: dict[str, EmbedderScore] = {}
    errors: dict[str, str] = {}
    for embedder in sorted(embedders, key=lambda e: e.id):
        try:
            vec_expl = backends.embed_text(embedder, explanation.text)
            vec_summ = backends.embed_text(embedder, summary.text)
            raw = cosine_similarity(vec_expl, vec_summ)
        except (BackendError, UndefinedSimilarityError) as exc:
            errors[embedder.id] = str(exc)
            continue
        scores[embedder.id] = EmbedderScore(raw_cosine=raw, reported=max(raw, 0.0))
    return PlausibilityResult(
        video_id=video_id,
        explainer_id=explainer_id,
        approach_id=approach_id,
        per_embedder=scores,
        errors=errors,
    )
