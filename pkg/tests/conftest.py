import numpy as np
import pytest

from dirw.problems import benchmark2d, BENCHMARK2D_SADDLE_X2


@pytest.fixture(scope="session")
def bench():
    return benchmark2d()


@pytest.fixture(scope="session")
def saddle_x2():
    return BENCHMARK2D_SADDLE_X2


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
