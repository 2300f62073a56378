import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def grid64():
    from transwave.grid import make_grid
    return make_grid(1, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
