import numpy as np
import pytest
from hypothesis import settings, HealthCheck

from zonalsim.fields import Grid, Params
from zonalsim.geometry import sphere, bump
from zonalsim.operators import coriolis_exact

settings.register_profile("default", max_examples=15, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def sphere_grid():
    return Grid(sphere(), 32, 24)


@pytest.fixture(scope="session")
def bump_grid():
    return Grid(bump(0.2), 32, 24)


@pytest.fixture(scope="session")
def coarse_grid():
    return Grid(sphere(), 12, 10)


@pytest.fixture(scope="session")
def exact_cor(sphere_grid):
    return coriolis_exact(sphere_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def params():
    return Params(0.1, 0.1)
