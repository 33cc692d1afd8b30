import numpy as np
import pytest

from ffl.ifs import CIFS, AffineMap, cantor_system, dyadic_uniform_system


@pytest.fixture
def cantor():
    return cantor_system()


@pytest.fixture
def dyadic():
    return dyadic_uniform_system()


@pytest.fixture
def dirac():
    # single map, attractor is the fixed point 0
    return CIFS((0,), {0: AffineMap(0.5, 0.0)}, {0: 1.0})


@pytest.fixture
def two_ratio():
    # {x/2, x/3 + 2/3}, the standard heterogeneous test system
    return CIFS((0, 1), {0: AffineMap(0.5, 0.0), 1: AffineMap(1 / 3, 2 / 3)},
                {0: 0.5, 1: 0.5})


def lebesgue_transform(xi):
    """Closed form for the uniform law on [0,1]."""
    if xi == 0:
        return 1.0 + 0.0j
    return (1.0 - np.exp(-2j * np.pi * xi)) / (2j * np.pi * xi)
