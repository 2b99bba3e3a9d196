import numpy as np
import pytest

from gwit import synth


@pytest.fixture
def rng():
    return np.random.default_rng(20161016)


@pytest.fixture
def tms_state():
    """Two-mode squeezed vacuum, r = 0.5, uniform dC = 1e-3."""
    return synth.tms(0.5).with_uncertainty(1e-3)
