import math

import numpy as np
import pytest

from raftmin.exceptions import GridError, NumericalError
from raftmin.grid import (ScalarField, backward, basis_function, cosine_mode_index, dominant_wavenumber, forward,
                          grid_from_spec, inner, integrate, inverse_transform, make_grid, transform)
from raftmin.models import Boundary
from raftmin.schemas import GridSpec


@pytest.mark.parametrize("boundary", [Boundary.NEUMANN, Boundary.PERIODIC])
def test_transform_inverts_and_preserves_norm(boundary):
    """Test that backward undoes forward and Parseval holds exactly."""
    grid = make_grid(2, [2.0, 1.0], [32, 16], boundary)
    values = np.random.default_rng(3).standard_normal(grid.shape)

    coeffs = forward(grid, values)

    np.testing.assert_allclose(backward(grid, coeffs), values, rtol=1e-12, atol=1e-12)
    assert math.isclose(integrate(ScalarField(grid, values**2)), float(np.sum(coeffs**2)), rel_tol=1e-12)


def test_field_transform_round_trip():
    grid = make_grid(1, [2.0], [48], Boundary.PERIODIC)
    field = ScalarField(grid, np.cos(3 * math.pi * grid.mesh()[0]))
    spectral = transform(field)

    assert spectral.grid == grid
    np.testing.assert_allclose(inverse_transform(spectral).values, field.values, atol=1e-13)


@pytest.mark.parametrize("boundary", [Boundary.NEUMANN, Boundary.PERIODIC])
def test_basis_functions_are_orthonormal(boundary):
    """Test discrete orthonormality of two basis functions."""
    grid = make_grid(1, [2.0], [64], boundary)
    psi1, psi2 = basis_function(grid, (5,)), basis_function(grid, (9,))

    assert abs(inner(psi1, psi2)) < 1e-10
    assert math.isclose(inner(psi1, psi1), 1.0, rel_tol=1e-12)


def test_neumann_eigenvalues_follow_axis_ladder(neumann_2d):
    """Test lambda^2 = (pi k1 / l1)^2 + (pi k2 / l2)^2 on a Neumann box."""
    assert neumann_2d.eigenvalues[0, 0] == 0.0
    assert math.isclose(neumann_2d.eigenvalues[3, 2], (3 * math.pi / 2.0) ** 2 + (2 * math.pi / 1.5) ** 2)


def test_periodic_wavenumbers_pair_cos_and_sin(periodic_1d):
    """Test that packed slots 2m-1 and 2m share the frequency m."""
    k = periodic_1d.axis_wavenumbers[0]
    assert k[0] == 0.0
    assert k[1] == k[2] == pytest.approx(math.pi)
    assert k[-1] == pytest.approx(64 * math.pi)


@pytest.mark.parametrize("boundary,expected", [(Boundary.NEUMANN, 12), (Boundary.PERIODIC, 11)])
def test_cosine_mode_index_matches_cosine(boundary, expected):
    """Test that cos(2 pi 3 x) on (-1, 1) sits at the documented basis slot."""
    grid = make_grid(1, [2.0], [64], boundary)
    idx = cosine_mode_index(grid, 3)
    x = grid.coords(0)

    assert idx == (expected,)
    np.testing.assert_allclose(basis_function(grid, idx).values, np.cos(6 * math.pi * x), atol=1e-12)


def test_cosine_mode_index_rejects_off_ladder_modes():
    """Test that a mode whose frequency is not on the grid's ladder is refused."""
    grid = make_grid(1, [1.5], [64], Boundary.PERIODIC)
    with pytest.raises(GridError):
        cosine_mode_index(grid, 1)


def test_dominant_wavenumber_picks_largest_coefficient(neumann_1d):
    """Test that the constant mode is ignored and the largest mode wins."""
    coeffs = np.zeros(neumann_1d.shape)
    coeffs[0] = 10.0
    coeffs[7] = 1.0
    coeffs[3] = 0.5

    assert dominant_wavenumber(ScalarField(neumann_1d, backward(neumann_1d, coeffs))) == pytest.approx(7 * math.pi / 2)


def test_integrate_respects_region(neumann_1d):
    """Test sub-box integration of a constant."""
    field = ScalarField(neumann_1d, np.ones(neumann_1d.shape))
    assert integrate(field) == pytest.approx(2.0)
    assert integrate(field, [(0.0, 1.0)]) == pytest.approx(1.0)


@pytest.mark.parametrize("kwargs", [
    dict(d=4, extents=[1.0] * 4, n=[4] * 4),
    dict(d=1, extents=[2.0], n=[7]),
    dict(d=1, extents=[-1.0], n=[8]),
    dict(d=2, extents=[1.0], n=[8, 8]),
])
def test_make_grid_rejects_invalid_shapes(kwargs):
    """Test grid validation."""
    with pytest.raises(GridError):
        make_grid(**kwargs)


def test_grid_from_spec_and_back():
    """Test that a grid reproduces its spec."""
    spec = GridSpec(dims=2, extents=[2.0, 1.0], n=[16, 8], boundary="periodic")
    grid = grid_from_spec(spec)
    assert grid.spec() == spec.model_copy(update={"origin": [-1.0, -0.5]})


def test_fields_check_grids_and_finiteness(neumann_1d, periodic_1d):
    """Test that fields on different grids do not mix and non-finite values are refused."""
    a = ScalarField(neumann_1d, np.zeros(128))
    b = ScalarField(periodic_1d, np.zeros(128))
    with pytest.raises(GridError):
        a + b
    with pytest.raises(NumericalError):
        ScalarField(neumann_1d, np.full(128, np.nan))
    with pytest.raises(GridError):
        ScalarField(neumann_1d, np.zeros(100))
