"""Per-fragment influence scores for a summarizer's output.

Two explainers are provided. The perturbation explainer samples keep/drop
masks over fragments, scores the summarizer on each perturbed input, and
fits a weighted linear surrogate whose target is the rank correlation
between the original and perturbed outputs; a fragment's coefficient is its
influence (larger = its presence preserves the output ranking more). The
attention explainer averages the summarizer's per-frame attention signal
within each fragment.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ._masking import REPLACEMENT_MODES, ZEROS, replace_fragment_rows
from .backends import base as backends
from .errors import InvalidInputError, ValidationError
from .faithfulness import kendall_tau
from .model import ExplanationScores, FeatureBundle, PerturbationMask

FLAG_SINGULAR_FALLBACK = "singular-fallback"
_RIDGE_FLOOR = 1e-6


@dataclass(frozen=True)
class ExplainerConfig:
    """Knobs of the perturbation explainer; all recorded per run."""

    M: int = 20000
    keep_probability: float = 0.5
    kernel_sigma: float = 0.25
    ridge_lambda: float = 1e-3
    replacement: str = ZEROS
    seed: int = 0

    def __post_init__(self):
        if self.M < 1:
            raise ValidationError(f"M must be >= 1, got {self.M}")
        if not (0.0 < self.keep_probability < 1.0):
            raise ValidationError("keep_probability must lie strictly in (0, 1)")
        if not (self.kernel_sigma > 0):
            raise ValidationError("kernel_sigma must be positive")
        if self.ridge_lambda < 0:
            raise ValidationError("ridge_lambda must be non-negative")
        if self.replacement not in REPLACEMENT_MODES:
            raise ValidationError(f"unknown replacement mode {self.replacement!r}")

    def with_seed(self, seed: int) -> "ExplainerConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "keep_probability": self.keep_probability,
            "kernel_sigma": self.kernel_sigma,
            "ridge_lambda": self.ridge_lambda,
            "replacement": self.replacement,
            "seed": self.seed,
        }


def sample_masks(n_fragments: int, config: ExplainerConfig) -> list[PerturbationMask]:
    """Exactly M masks, Bernoulli(keep_probability) per fragment.

    Degenerate all-kept/all-dropped draws are rejected and resampled, so the
    sequence is a pure function of (n_fragments, M, keep_probability, seed).
    """
    if n_fragments < 2:
        raise InvalidInputError(f"need at least 2 fragments, got {n_fragments}")
    rng = np.random.default_rng(config.seed)
    masks = []
    for _ in range(config.M):
        while True:
            kept = rng.random(n_fragments) < config.keep_probability
            if kept.any() and not kept.all():
                break
        masks.append(PerturbationMask(kept))
    return masks


def apply_replacement(
    features: np.ndarray,
    fragments: tuple[tuple[int, int], ...],
    mask: PerturbationMask,
    mode: str = ZEROS,
) -> np.ndarray:
    """Features with the mask's dropped fragments' rows replaced."""
    return replace_fragment_rows(features, fragments, mask.kept, mode)


def _fit_weighted_ridge(
    design: np.ndarray, targets: np.ndarray, weights: np.ndarray, ridge_lambda: float
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Solve the weighted normal equations; the intercept is not penalized."""
    n_cols = design.shape[1]
    weighted = design * weights[:, None]
    gram = design.T @ weighted
    moment = weighted.T @ targets
    penalty = np.eye(n_cols)
    penalty[0, 0] = 0.0

    def solve(lam: float) -> np.ndarray:
        beta = np.linalg.solve(gram + lam * penalty, moment)
        if not np.all(np.isfinite(beta)):
            raise np.linalg.LinAlgError("non-finite solution")
        return beta

    try:
        return solve(ridge_lambda), ()
    except np.linalg.LinAlgError:
        pass
    try:
        return solve(max(ridge_lambda, _RIDGE_FLOOR)), (FLAG_SINGULAR_FALLBACK,)
    except np.linalg.LinAlgError:
        scaled = design * np.sqrt(weights)[:, None]
        beta, *_ = np.linalg.lstsq(scaled, targets * np.sqrt(weights), rcond=None)
        return beta, (FLAG_SINGULAR_FALLBACK,)


def explain_lime(
    backend,
    bundle: FeatureBundle,
    config: ExplainerConfig,
    masks: Sequence[PerturbationMask] | None = None,
) -> ExplanationScores:
    """Fit the perturbation surrogate and return per-fragment coefficients.

    ``masks`` overrides the sampled set (exhaustive-enumeration tests); by
    default ``sample_masks`` draws M of them from the config seed.
    """
    n_frag = bundle.n_fragments
    if n_frag < 2:
        raise InvalidInputError("perturbation explanation needs at least 2 fragments")
    if masks is None:
        masks = sample_masks(n_frag, config)
    else:
        masks = list(masks)
        if not masks:
            raise InvalidInputError("mask list must be non-empty")
        for m in masks:
            if m.kept.size != n_frag:
                raise InvalidInputError("mask width does not match fragment count")

    baseline = backends.score_frames(backend, bundle.features, video_id=bundle.video_id)
    kept_matrix = np.array([m.kept for m in masks], dtype=np.float64)
    fidelities = np.empty(len(masks), dtype=np.float64)
    for row, mask in enumerate(masks):
        perturbed = replace_fragment_rows(
            bundle.features, bundle.fragments, mask.kept, config.replacement
        )
        perturbed_scores = backends.score_frames(
            backend, perturbed, video_id=bundle.video_id
        )
        fidelities[row] = kendall_tau(baseline.scores, perturbed_scores.scores).value

    drop_fraction = 1.0 - kept_matrix.mean(axis=1)
    weights = np.exp(-(drop_fraction**2) / config.kernel_sigma**2)
    design = np.column_stack([np.ones(len(masks)), kept_matrix])
    beta, flags = _fit_weighted_ridge(design, fidelities, weights, config.ridge_lambda)
    return ExplanationScores.from_scores("lime", beta[1:], flags=flags)


def explain_attention(backend, bundle: FeatureBundle) -> ExplanationScores:
    """Mean per-frame attention within each fragment."""
    signal = backends.attention_signal(backend, bundle.features)
    per_fragment = np.array(
        [signal[s:e].mean() for s, e in bundle.fragments], dtype=np.float64
    )
    return ExplanationScores.from_scores("attention", per_fragment)


def top_k_fragments(scores: ExplanationScores, k: int) -> tuple[int, ...]:
    """The k most influential fragment indices (score desc, index asc on ties)."""
    if not (1 <= k <= scores.n_fragments):
        raise InvalidInputError(f"k={k} out of range [1, {scores.n_fragments}]")
    return scores.top_k[:k]
