import numpy as np
import pytest

from aqftlab.geometry import GridConfig, build_grid
from aqftlab.propagators import assemble_K, kernel, two_point

TWO_PI = 2 * np.pi


@pytest.fixture(scope="session")
def config():
    return GridConfig(32, 32, TWO_PI, TWO_PI, mass=1.0)


@pytest.fixture(scope="session")
def grid(config):
    return build_grid(config)


@pytest.fixture(scope="session")
def op(grid):
    return assemble_K(grid)


@pytest.fixture(scope="session")
def Delta(op):
    return kernel(op, "pauli_jordan")


@pytest.fixture(scope="session")
def dirac(op):
    return kernel(op, "dirac")


@pytest.fixture(scope="session")
def W(op):
    return two_point(op, "wightman_vacuum")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def block(grid, n0, n1, j0, j1):
    f = np.zeros(grid.shape)
    f[n0:n1, j0:j1] = 1.0
    return f
