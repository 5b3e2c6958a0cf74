from __future__ import annotations

import numpy as np
import pytest

from vsxplain.fixtures import make_bundle


@pytest.fixture
def bundle10():
    """Ten-fragment bundle used by most explainer tests."""
    return make_bundle(
        "vid-10", fragment_lengths=(5, 4, 6, 5, 5, 4, 6, 5, 5, 5), seed=11
    )


@pytest.fixture
def bundle6():
    return make_bundle("vid-6", fragment_lengths=(4, 5, 3, 4, 5, 4), seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240)
