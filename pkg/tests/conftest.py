import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mhdsplit import presets
from mhdsplit import spectral as sp

settings.register_profile(
    "fast",
    max_examples=20,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fast")

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def grid8():
    return sp.make_grid(8, TWO_PI)


@pytest.fixture(scope="session")
def grid16():
    return sp.make_grid(16, TWO_PI)


@pytest.fixture(scope="session")
def grid32():
    return sp.make_grid(32, TWO_PI)


@pytest.fixture(scope="session")
def tg_pair(grid16):
    return presets.initial_data(grid16, "taylor_green", amplitude=0.1)


def single_mode_vector(grid, mode=(1, 0, 0), component=1, amplitude=1.0):
    """Real single-mode field: amplitude * cos(k.x) in one component.

    The L2 norm is amplitude * sqrt(volume / 2).
    """
    c = np.zeros((3,) + (grid.n,) * 3, dtype=complex)
    idx = tuple(m % grid.n for m in mode)
    neg = tuple((-m) % grid.n for m in mode)
    c[(component,) + idx] = 0.5 * amplitude
    c[(component,) + neg] = 0.5 * amplitude
    return sp.vector_from_coeff(grid, c)
