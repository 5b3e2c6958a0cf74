"""Row replacement shared by the explainer and the faithfulness measure."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

ZEROS = "zeros"
DATASET_MEAN = "dataset_mean"
REPLACEMENT_MODES = (ZEROS, DATASET_MEAN)


def replace_fragment_rows(
    features: np.ndarray,
    fragments: tuple[tuple[int, int], ...],
    kept: np.ndarray,
    mode: str,
) -> np.ndarray:
    """Return a copy of ``features`` with dropped fragments' rows replaced.

    Kept rows are bit-identical to the input. The replacement vector for
    ``dataset_mean`` is the column-wise mean of the *original* matrix.
    """
    if mode not in REPLACEMENT_MODES:
        raise InvalidInputError(f"unknown replacement mode {mode!r}")
    kept = np.asarray(kept, dtype=bool)
    if kept.size != len(fragments):
        raise InvalidInputError(
            f"mask has {kept.size} flags for {len(fragments)} fragments"
        )
    out = np.array(features, copy=True)
    if kept.all():
        return out
    fill = features.mean(axis=0) if mode == DATASET_MEAN else 0.0
    for idx in np.flatnonzero(~kept):
        start, end = fragments[idx]
        out[start:end] = fill
    return out
