import numpy as np
import pytest

from raftmin.cell import estimate_md
from raftmin.grid import ScalarField, backward, band_mask, make_grid
from raftmin.models import Boundary
from raftmin.potential import quartic_truncated


@pytest.fixture
def neumann_1d():
    """128 cell-centred points on (-1, 1)."""
    return make_grid(1, [2.0], [128], Boundary.NEUMANN)


@pytest.fixture
def periodic_1d():
    """128 points on the periodic interval [-1, 1)."""
    return make_grid(1, [2.0], [128], Boundary.PERIODIC)


@pytest.fixture
def neumann_2d():
    """64 x 48 Neumann grid on (-1, 1) x (-0.75, 0.75)."""
    return make_grid(2, [2.0, 1.5], [64, 48], Boundary.NEUMANN)


@pytest.fixture
def pot():
    """Default truncated quartic with crossover at 2."""
    return quartic_truncated(2.0)


@pytest.fixture
def smooth_field():
    """Factory for seeded band-limited fields of unit peak amplitude plus an offset."""
    def make(grid, seed=0, band=6, offset=0.0):
        rng = np.random.default_rng(seed)
        coeffs = rng.standard_normal(grid.shape) * band_mask(grid, band)
        values = backward(grid, coeffs)
        values = values / np.max(np.abs(values))
        return ScalarField(grid, values + offset)
    return make


@pytest.fixture(scope="session")
def cell_q005():
    """Cell estimate at q = 0.05 on a short scale grid, shared across test modules."""
    return estimate_md(quartic_truncated(2.0), 0.05, eps_grid=[0.05, 0.1], profile_dofs=64, clamp=0.05)
