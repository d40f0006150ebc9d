import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sproc.spatial import Grid, Raster, Window

settings.register_profile("default", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_window():
    return Window.unit_square()


@pytest.fixture
def grid20():
    return Grid.covering(0, 1, 0, 1, 20)


@pytest.fixture
def zx20(grid20):
    return Raster.from_function(grid20, lambda x, y: x)
