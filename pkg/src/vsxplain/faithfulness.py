"""Faithfulness scoring: tie-corrected Kendall rank correlation and the
masking-based output-discrepancy measure.

The correlation is computed from exact integer pair counts,

    tau_b = (C - D) / sqrt((n0 - t_x) * (n0 - t_y))

with ``n0 = n(n-1)/2`` and ``t_x``/``t_y`` the pairs tied within each input,
so identical tie-free inputs give exactly 1.0 and a full reversal exactly
-1.0. Discordant pairs are counted in O(n log n) with a Fenwick tree over
rank-compressed values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._masking import replace_fragment_rows
from .errors import InvalidInputError, ValidationError
from .model import ExplanationScores, FeatureBundle, ImportanceScores


class TauResult(NamedTuple):
    value: float
    degenerate: bool = False


def _run_tie_pairs(change: np.ndarray) -> int:
    """Tied pairs within equal-value runs of a sorted sequence.

    ``change[i]`` flags ``sorted[i+1] != sorted[i]``; each run of r equal
    values contributes r(r-1)/2 tied pairs.
    """
    starts = np.flatnonzero(np.concatenate(([True], change)))
    lengths = np.diff(np.concatenate((starts, [change.size + 1])))
    return int(np.sum(lengths * (lengths - 1) // 2))


def _count_strict_inversions(ranks: np.ndarray, n_ranks: int) -> int:
    """Pairs (i < j) with ranks[i] > ranks[j]; ranks are 1-based."""
    tree = [0] * (n_ranks + 1)
    inversions = 0
    for seen, r in enumerate(ranks.tolist()):
        i = r
        not_greater = 0
        while i > 0:
            not_greater += tree[i]
            i -= i & (-i)
        inversions += seen - not_greater
        i = r
        while i <= n_ranks:
            tree[i] += 1
            i += i & (-i)
    return inversions


def _pair_counts(x: np.ndarray, y: np.ndarray) -> tuple[int, int, int, int, int]:
    """Exact (concordant, discordant, n0, ties_x, ties_y) for one pair."""
    n = x.size
    n0 = n * (n - 1) // 2
    order = np.lexsort((y, x))
    xs = x[order]
    ys = y[order]
    x_change = xs[1:] != xs[:-1]
    ties_x = _run_tie_pairs(x_change)
    ties_both = _run_tie_pairs(x_change | (ys[1:] != ys[:-1]))
    ys_sorted = np.sort(y)
    y_change = ys_sorted[1:] != ys_sorted[:-1]
    ties_y = _run_tie_pairs(y_change)
    # After sorting by (x, y) ascending, x-tied pairs have their y sorted, so
    # every strict y-inversion comes from an x-strict pair: it is discordant.
    uniq_y = ys_sorted[np.concatenate(([True], y_change))]
    y_ranks = np.searchsorted(uniq_y, ys) + 1
    discordant = _count_strict_inversions(y_ranks, uniq_y.size)
    concordant = (n0 - ties_x - ties_y + ties_both) - discordant
    return concordant, discordant, n0, ties_x, ties_y


def kendall_tau(y: np.ndarray, y_hat: np.ndarray) -> TauResult:
    """Tau-b between two score vectors.

    Constant inputs make the correlation undefined; those return the
    sentinel 0.0 with ``degenerate=True`` so dataset aggregation stays total.
    """
    a = np.asarray(y, dtype=np.float64).ravel()
    b = np.asarray(y_hat, dtype=np.float64).ravel()
    if np.asarray(y).ndim > 1 or np.asarray(y_hat).ndim > 1:
        raise InvalidInputError("kendall_tau expects 1-D vectors")
    if a.size != b.size:
        raise InvalidInputError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise InvalidInputError("kendall_tau needs at least 2 elements")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidInputError("kendall_tau inputs must be finite")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return TauResult(0.0, True)
    if np.array_equal(a, b):
        # C = n0 - ties, D = 0, tx = ty = ties: exactly 1 by the formula
        return TauResult(1.0, False)
    con, dis, n0, tx, ty = _pair_counts(a, b)
    tau = (con - dis) / math.sqrt((n0 - tx) * (n0 - ty))
    return TauResult(float(min(1.0, max(-1.0, tau))), False)


@dataclass(frozen=True)
class DiscResult:
    """Correlation between summarizer outputs before and after masking."""

    video_id: str
    explainer_id: str
    k: int
    delta_e: float
    degenerate: bool = False

    def __post_init__(self):
        if not math.isfinite(self.delta_e) or not (-1.0 <= self.delta_e <= 1.0):
            raise ValidationError(f"delta_e {self.delta_e} outside [-1, 1]")


def mask_top_k(
    bundle: FeatureBundle,
    scores: ExplanationScores,
    k: int,
    mode: str,
) -> np.ndarray:
    """Features with the explanation's top-k fragments' rows replaced.

    ``k=0`` returns an identical copy; ``k=n_fragments`` replaces every row.
    Never mutates its input.
    """
    n_frag = bundle.n_fragments
    if scores.n_fragments != n_frag:
        raise InvalidInputError(
            f"explanation covers {scores.n_fragments} fragments, bundle has {n_frag}"
        )
    if not (0 <= k <= n_frag):
        raise InvalidInputError(f"k={k} out of range [0, {n_frag}]")
    kept = np.ones(n_frag, dtype=bool)
    kept[list(scores.top_k[:k])] = False
    return replace_fragment_rows(bundle.features, bundle.fragments, kept, mode)


def disc_plus(
    backend,
    bundle: FeatureBundle,
    scores: ExplanationScores,
    k: int,
    mode: str,
    baseline: ImportanceScores | None = None,
) -> DiscResult:
    """Kendall correlation of outputs for the original and masked features.

    Lower values mean the masked fragments mattered more to the summarizer.
    ``baseline`` lets callers reuse an already computed original output.
    """
    from .backends.base import score_frames  # circular at import time otherwise

    if baseline is None:
        baseline = score_frames(backend, bundle.features, video_id=bundle.video_id)
    elif len(baseline) != bundle.n_frames:
        raise InvalidInputError("baseline length does not match bundle frames")
    masked = mask_top_k(bundle, scores, k, mode)
    perturbed = score_frames(backend, masked, video_id=bundle.video_id)
    tau = kendall_tau(baseline.scores, perturbed.scores)
    return DiscResult(
        video_id=bundle.video_id,
        explainer_id=scores.explainer_id,
        k=k,
        delta_e=tau.value,
        degenerate=tau.degenerate,
    )
