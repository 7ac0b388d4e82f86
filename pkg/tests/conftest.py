import numpy as np
import pytest

from src.heisenberg_core import random_points


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def points(rng):
    """200 points with gauge in [0.3, 5], away from the t-axis."""
    return random_points(rng, 200, 0.3, 5.0)
