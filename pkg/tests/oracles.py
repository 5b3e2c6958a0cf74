"""Independent oracles used to check the production implementations.

These deliberately take the brute-force route: rank correlation by
enumerating every pair, and weighted least squares via the pseudo-inverse
of the explicitly weighted system. They share no code with the package
internals they verify.
"""

from __future__ import annotations

import math

import numpy as np


def tau_b_oracle(x, y) -> float:
    """Tau-b by O(n^2) pair enumeration with sign matrices."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    n = a.size
    sign_a = np.sign(a[:, None] - a[None, :])
    sign_b = np.sign(b[:, None] - b[None, :])
    upper = np.triu_indices(n, k=1)
    sa = sign_a[upper]
    sb = sign_b[upper]
    concordant = int(np.sum((sa * sb) > 0))
    discordant = int(np.sum((sa * sb) < 0))
    ties_a = int(np.sum(sa == 0))
    ties_b = int(np.sum(sb == 0))
    n0 = n * (n - 1) // 2
    denom = (n0 - ties_a) * (n0 - ties_b)
    if denom == 0:
        return 0.0
    return (concordant - discordant) / math.sqrt(denom)


def weighted_least_squares_oracle(
    kept_matrix: np.ndarray, targets: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """Exact WLS coefficients (intercept first) via pinv of the scaled system."""
    design = np.column_stack([np.ones(len(targets)), np.asarray(kept_matrix, dtype=np.float64)])
    sqrt_w = np.sqrt(np.asarray(weights, dtype=np.float64))
    return np.linalg.pinv(design * sqrt_w[:, None]) @ (targets * sqrt_w)


def zero_out_fragments(
    features: np.ndarray, fragments, kept: np.ndarray
) -> np.ndarray:
    """Reference replacement: zero the rows of dropped fragments."""
    out = np.array(features, copy=True)
    for index, flag in enumerate(kept):
        if not flag:
            start, end = fragments[index]
            out[start:end] = 0.0
    return out


def all_legal_masks(n_fragments: int) -> list[np.ndarray]:
    """Every keep-vector except all-kept and all-dropped, in binary order."""
    masks = []
    for bits in range(1, 2**n_fragments - 1):
        kept = np.array(
            [(bits >> i) & 1 == 1 for i in range(n_fragments)], dtype=bool
        )
        masks.append(kept)
    return masks
