import numpy as np
import pytest

from beamalign.maps import MapTrainingConfig, train_beam_module


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_beam_module():
    """A quickly trained 8-antenna module, good enough for qualitative checks."""
    cfg = MapTrainingConfig(n_rx=8, batch=64, K=64, updates=400, lr=3e-3, hidden=32, seed=7)
    module, losses = train_beam_module(cfg)
    return module
