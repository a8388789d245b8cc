import numpy as np
import pytest

from sapsim.grid import Wavefunction, make_grid
from sapsim.potential import PotentialParams


@pytest.fixture(scope="session")
def grid():
    return make_grid(-12.0, 12.0, 2048)


@pytest.fixture(scope="session")
def params():
    """Standard triple-well parameters with the long default pulse."""
    return PotentialParams(v_min=5.0, v_max=1000.0, sigma=0.16, x0=0.48,
                           t_p=5000.0, t_d=750.0)


@pytest.fixture(scope="session")
def bare_params():
    return PotentialParams(v_min=0.0, v_max=0.0, sigma=0.16, x0=0.48,
                           t_p=100.0, t_d=15.0)


def gaussian_state(grid, center=0.0, width=1.0, k=0.0, t=0.0):
    x = grid.x
    psi = np.exp(-((x - center) ** 2) / (2.0 * width**2)).astype(complex)
    psi *= np.exp(1j * k * x)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    return Wavefunction(grid, psi, t)
