import numpy as np
import pytest

from ergomax.dynamics import DEFAULT_JITTER_SCALE, doubling, tent


def philox(a, b=0):
    """Fresh Generator on a fixed Philox key (the package's stream scheme)."""
    return np.random.default_rng(np.random.Philox(key=[a, b]))


@pytest.fixture
def tent_j():
    return tent(DEFAULT_JITTER_SCALE)


@pytest.fixture
def doubling_j():
    return doubling(DEFAULT_JITTER_SCALE)
