"""Shared fixtures: nonlinearities, solved profiles and small grids."""

import numpy as np
import pytest

from app.core.field import SpectralGrid
from app.core.linop import LinearizedOperator
from app.core.nonlinearity import PolynomialNonlinearity
from app.core.profile import solve_profile


@pytest.fixture(scope="session")
def cubic():
    return PolynomialNonlinearity.cubic()


@pytest.fixture(scope="session")
def cubic_quintic():
    return PolynomialNonlinearity.cubic_quintic(2.0, 0.1)


@pytest.fixture(scope="session")
def cubic_profile(cubic):
    return solve_profile(cubic, 1.0)


@pytest.fixture(scope="session")
def cubic_quintic_profile(cubic_quintic):
    return solve_profile(cubic_quintic, 1.0)


@pytest.fixture(scope="session")
def small_grid():
    """Small enough for the dense eigen and fallback paths."""
    return SpectralGrid(512, 60.0)


@pytest.fixture(scope="session")
def grid():
    return SpectralGrid(1024, 80.0)


@pytest.fixture(scope="session")
def cubic_operator(cubic_profile, grid):
    return LinearizedOperator(cubic_profile, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
