import numpy as np
import pytest

from wavetuner import build_direction_grid, uniform_band


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def band():
    return uniform_band(6.0, 12)


@pytest.fixture
def grid():
    return build_direction_grid(4, 8, margin=0.02)


@pytest.fixture
def grid_with_annulus():
    return build_direction_grid(4, 8, margin=0.02, annulus=(3, 2.0))
