"""Shared domain types.

All types are immutable after construction and validate their invariants in
``__post_init__``; an instance that exists is a valid instance. Arrays are
stored as read-only copies so instances can be shared across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np

from ._digest import digest_array, digest_json
from .errors import ValidationError

EXPLANATION_KINDS = (
    "summary_description",
    "explanation_description",
    "fragment_description",
    "merged_description",
)

APPROACH_IDS = ("approach1", "approach2", "not_applicable")

PIPELINE_EXPLAINER_IDS = ("lime", "attention")


def _readonly(arr: np.ndarray, dtype=None) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def rank_fragments_by_influence(per_fragment: np.ndarray) -> tuple[int, ...]:
    """Fragment indices by descending score; ties go to the earlier index."""
    values = np.asarray(per_fragment, dtype=np.float64)
    order = sorted(range(values.size), key=lambda i: (-values[i], i))
    return tuple(order)


@dataclass(frozen=True)
class FeatureBundle:
    """Per-video frame features plus fragment boundaries and frame mapping.

    ``fragments`` are half-open ``(start, end)`` ranges over sampled-frame
    indices; ``picks`` maps each sampled-frame index to its original frame
    index. ``metadata`` carries loader provenance and is not part of the
    content digest.
    """

    video_id: str
    features: np.ndarray
    fragments: tuple[tuple[int, int], ...]
    picks: np.ndarray
    fps_original: float
    source_path: Path | None = None
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "features", _readonly(self.features))
        object.__setattr__(
            self, "fragments", tuple((int(s), int(e)) for s, e in self.fragments)
        )
        object.__setattr__(self, "picks", _readonly(self.picks, dtype=np.int64))
        validate_bundle(self)

    @property
    def n_frames(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_fragments(self) -> int:
        return len(self.fragments)

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    @cached_property
    def content_digest(self) -> str:
        return digest_json(
            {
                "features": digest_array(self.features),
                "fragments": [list(f) for f in self.fragments],
                "picks": digest_array(self.picks),
                "fps": float(self.fps_original),
            }
        )


def validate_bundle(bundle: FeatureBundle) -> FeatureBundle:
    """Check every FeatureBundle invariant; report the first violation."""
    feats = bundle.features
    if not bundle.video_id:
        raise ValidationError("video_id must be non-empty")
    if feats.ndim != 2:
        raise ValidationError(f"features must be 2-D, got ndim={feats.ndim}")
    n, dim = feats.shape
    if n < 1 or dim < 1:
        raise ValidationError(f"features must be non-empty, got shape {feats.shape}")
    if not np.all(np.isfinite(feats)):
        raise ValidationError("features contain non-finite values")
    if not bundle.fragments:
        raise ValidationError("at least one fragment is required")
    for i, (s, e) in enumerate(bundle.fragments):
        if s >= e:
            raise ValidationError(f"empty fragment {i}: ({s}, {e})")
    starts = [s for s, _ in bundle.fragments]
    if starts != sorted(starts):
        raise ValidationError("fragments not sorted by start")
    if bundle.fragments[0][0] != 0:
        raise ValidationError("coverage gap before fragment 0")
    prev_end = bundle.fragments[0][1]
    for i, (s, e) in enumerate(bundle.fragments[1:], start=1):
        if s < prev_end:
            raise ValidationError(f"overlap at fragment {i}")
        if s > prev_end:
            raise ValidationError(f"coverage gap at fragment {i}")
        prev_end = e
    if prev_end != n:
        raise ValidationError(
            f"fragments cover [0, {prev_end}) but there are {n} sampled frames"
        )
    picks = bundle.picks
    if picks.ndim != 1 or picks.size != n:
        raise ValidationError(
            f"picks length {picks.size} does not match {n} feature rows"
        )
    if picks.size > 1 and not np.all(np.diff(picks) > 0):
        raise ValidationError("picks not strictly increasing")
    if np.any(picks < 0):
        raise ValidationError("picks contain negative frame indices")
    if not (bundle.fps_original > 0):
        raise ValidationError(f"fps_original must be positive, got {bundle.fps_original}")
    return bundle


@dataclass(frozen=True)
class ImportanceScores:
    """Per-frame scores emitted by a summarizer backend, each in [0, 1]."""

    video_id: str
    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scores", _readonly(self.scores, dtype=np.float64))
        s = self.scores
        if s.ndim != 1 or s.size < 1:
            raise ValidationError(f"scores must be a non-empty vector, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValidationError("scores contain non-finite values")
        if np.any(s < 0) or np.any(s > 1):
            raise ValidationError("scores must lie in [0, 1]")

    def __len__(self) -> int:
        return int(self.scores.size)


@dataclass(frozen=True)
class SummarySelection:
    """Fragments selected into the video summary, in temporal order."""

    fragment_indices: tuple[int, ...]
    k: int = 3

    def __post_init__(self):
        object.__setattr__(
            self, "fragment_indices", tuple(int(i) for i in self.fragment_indices)
        )
        idx = self.fragment_indices
        if len(idx) != self.k:
            raise ValidationError(
                f"selection holds {len(idx)} fragments but k={self.k}"
            )
        if len(set(idx)) != len(idx):
            raise ValidationError("summary fragment indices must be distinct")
        if list(idx) != sorted(idx):
            raise ValidationError("summary fragment indices must be ascending")
        if idx and idx[0] < 0:
            raise ValidationError("summary fragment indices must be non-negative")


@dataclass(frozen=True)
class ExplanationScores:
    """Per-fragment influence values plus the full influence ranking.

    ``top_k`` holds every fragment index ordered by descending influence
    (earlier temporal index wins ties); consumers slice the first k. The
    pipeline uses explainer ids ``lime`` and ``attention``; tests may supply
    others.
    """

    explainer_id: str
    per_fragment: np.ndarray
    top_k: tuple[int, ...]
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "per_fragment", _readonly(self.per_fragment, dtype=np.float64)
        )
        object.__setattr__(self, "top_k", tuple(int(i) for i in self.top_k))
        object.__setattr__(self, "flags", tuple(self.flags))
        if not self.explainer_id:
            raise ValidationError("explainer_id must be non-empty")
        v = self.per_fragment
        if v.ndim != 1 or v.size < 1:
            raise ValidationError("per_fragment must be a non-empty vector")
        if not np.all(np.isfinite(v)):
            raise ValidationError("per_fragment contains non-finite values")
        expected = rank_fragments_by_influence(v)
        if self.top_k != expected:
            raise ValidationError(
                f"top_k {self.top_k} inconsistent with per_fragment ranking {expected}"
            )

    @classmethod
    def from_scores(
        cls,
        explainer_id: str,
        per_fragment: np.ndarray,
        flags: tuple[str, ...] = (),
    ) -> "ExplanationScores":
        values = np.asarray(per_fragment, dtype=np.float64)
        return cls(explainer_id, values, rank_fragments_by_influence(values), flags)

    @property
    def n_fragments(self) -> int:
        return int(self.per_fragment.size)


@dataclass(frozen=True)
class PerturbationMask:
    """Boolean keep-flags over fragments; never all-kept or all-dropped."""

    kept: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kept", _readonly(self.kept, dtype=bool))
        k = self.kept
        if k.ndim != 1 or k.size < 2:
            raise ValidationError("mask needs at least two fragments")
        if not k.any():
            raise ValidationError("mask drops every fragment")
        if k.all():
            raise ValidationError("mask keeps every fragment")

    @property
    def n_kept(self) -> int:
        return int(self.kept.sum())


@dataclass(frozen=True)
class TextArtifact:
    """A prompt-conditioned natural-language description with provenance."""

    kind: str
    text: str
    prompt_id: str
    source_clip_digest: str

    def __post_init__(self):
        if self.kind not in EXPLANATION_KINDS:
            raise ValidationError(f"unknown text kind {self.kind!r}")
        if not self.text:
            raise ValidationError("text must be non-empty")
        if not self.prompt_id:
            raise ValidationError("prompt_id must be non-empty")


@dataclass(frozen=True)
class EvaluationRecord:
    """One evaluated (video, explainer, k, approach) combination."""

    video_id: str
    dataset_id: str
    explainer_id: str
    k: int
    approach_id: str
    disc_plus: float
    plausibility: Mapping[str, float]
    seed: int
    config_digest: str
    flags: tuple[str, ...] = ()
    explanation_summary_overlap: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "plausibility", dict(self.plausibility))
        object.__setattr__(self, "flags", tuple(self.flags))
        if self.approach_id not in APPROACH_IDS:
            raise ValidationError(f"unknown approach_id {self.approach_id!r}")
        if not (-1.0 <= self.disc_plus <= 1.0):
            raise ValidationError(f"disc_plus {self.disc_plus} outside [-1, 1]")
        for emb, value in self.plausibility.items():
            if not (-1.0 <= value <= 1.0):
                raise ValidationError(
                    f"plausibility[{emb}] = {value} outside [-1, 1]"
                )
        if self.k < 0:
            raise ValidationError("k must be non-negative")
