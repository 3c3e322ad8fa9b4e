import pytest

from truss_shm.database import build_database
from truss_shm.model import benchmark_truss


@pytest.fixture(scope="session")
def truss():
    return benchmark_truss()


@pytest.fixture(scope="session")
def small_db(truss):
    """One damaged bar on the 5/35/65/95 % grid: 1 + 13 * 4 = 53 scenarios of 8 modes."""
    return build_database(truss, max_damaged_bars=1, grid_step=30, n_modes=8, n_jobs=1)


@pytest.fixture(scope="session")
def pair_db(truss):
    """Up to two damaged bars on the 5/95 % grid, 4 modes."""
    return build_database(truss, max_damaged_bars=2, grid_step=90, n_modes=4, n_jobs=1)
