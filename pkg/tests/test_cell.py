import math

import numpy as np
import pytest
from scipy.interpolate import BSpline

from raftmin.cell import (DEGREE, CellBasis, cell_energy_and_gradient, clamp_intervals, design_matrices, estimate_md,
                          profile_energy, ramp_profile, transverse_probe, uniform_knots)
from raftmin.exceptions import ConfigError
from raftmin.gamma import floor_check
from raftmin.models import ProfileInit


def test_knots_and_clamp_zone():
    knots = uniform_knots(16)
    assert len(knots) == 16 + 2 * DEGREE + 1
    assert clamp_intervals(64, 0.05) == 4
    assert clamp_intervals(20, 0.05) == 1


def test_design_matrices_match_spline_derivatives():
    """Test the sparse derivative maps against scipy's own derivative splines."""
    t = uniform_knots(12)
    c = np.random.default_rng(0).standard_normal(len(t) - DEGREE - 1)
    x = np.linspace(-0.5, 0.5, 101)
    spline = BSpline(t, c, DEGREE)
    for order, B in enumerate(design_matrices(t, x)):
        expected = spline(x) if order == 0 else spline.derivative(order)(x)
        np.testing.assert_allclose(B @ c, expected, rtol=1e-9, atol=1e-8)


def test_profiles_are_clamped():
    """Test that profiles are +1 left of the cell, -1 right of it, with flat clamp zones."""
    profile = ramp_profile(dofs=32, clamp=0.1)
    y = np.array([-0.7, -0.5, -0.45, 0.45, 0.5, 0.7])

    np.testing.assert_allclose(profile(y), [1.0, 1.0, 1.0, -1.0, -1.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(profile.derivative(y, 1), 0.0, atol=1e-9)
    assert 0.3 < profile.core_halfwidth() <= 0.4 + 1e-9


def test_analytic_gradient_matches_finite_differences(pot):
    basis = CellBasis(16, 0.05)
    free = basis.initial(ProfileInit.SINE)
    direction = np.random.default_rng(1).standard_normal(free.shape)
    _, grad = cell_energy_and_gradient(basis, free, pot, 0.2, 0.1)
    h = 1e-6
    plus, _ = cell_energy_and_gradient(basis, free + h * direction, pot, 0.2, 0.1)
    minus, _ = cell_energy_and_gradient(basis, free - h * direction, pot, 0.2, 0.1)

    assert (plus - minus) / (2 * h) == pytest.approx(float(grad @ direction), rel=1e-6)


def test_clamp_leaving_no_freedom_is_rejected():
    with pytest.raises(ConfigError):
        CellBasis(16, 0.5)


def test_scales_outside_unit_interval_are_rejected(pot):
    with pytest.raises(ConfigError):
        estimate_md(pot, 0.05, eps_grid=[0.0, 0.1])
    with pytest.raises(ConfigError):
        estimate_md(pot, 0.05, eps_grid=[1.5])


def test_estimate_is_positive_and_above_the_floor(cell_q005, pot):
    """Test m_d > 0 and m_d >= q int sqrt(W) (1 - 0.02) at q = 0.05."""
    floor, holds = floor_check(cell_q005.md, 0.05, pot)

    assert cell_q005.md > 0
    assert floor == pytest.approx(0.05 * 4.0 / 3.0)
    assert holds
    assert cell_q005.md == min(row.energy for row in cell_q005.scan)
    assert cell_q005.eps_argmin in (0.05, 0.1)


def test_estimate_bounded_by_any_admissible_profile(cell_q005, pot):
    """Test that the ramp start never beats the optimized estimate."""
    eps = cell_q005.eps_argmin
    assert cell_q005.md <= profile_energy(ramp_profile(64, 0.05, eps), pot, 0.05) + 1e-12


def test_refinement_never_raises_the_estimate(pot):
    """Test that a warm-started solve at twice the dofs does not increase m_d."""
    coarse = estimate_md(pot, 0.05, eps_grid=[0.2], profile_dofs=16, clamp=0.05, max_iter=200)
    fine = estimate_md(pot, 0.05, eps_grid=[0.2], profile_dofs=32, clamp=0.05, max_iter=200, warm_start=coarse)
    assert fine.md <= coarse.md * (1 + 1e-9) + 1e-12


@pytest.mark.slow
def test_fine_estimate_on_a_sixteen_point_scale_grid(pot):
    """Test m_d > 0 and the floor with 512 profile dofs over 16 scales in (0, 1]."""
    eps_grid = np.geomspace(0.02, 1.0, 16).tolist()
    coarse = estimate_md(pot, 0.05, eps_grid=eps_grid, profile_dofs=64, clamp=0.05)
    fine = estimate_md(pot, 0.05, eps_grid=eps_grid, profile_dofs=512, clamp=0.05, max_iter=2000, warm_start=coarse)
    floor, holds = floor_check(fine.md, 0.05, pot)

    assert len(fine.scan) == 16
    assert fine.md > 0
    assert holds
    assert fine.md >= floor * (1 - 0.02)
    assert fine.md <= coarse.md * (1 + 1e-9) + 1e-12


def test_prolongation_is_exact_on_nested_knots():
    profile = ramp_profile(dofs=16, clamp=0.05)
    finer = profile.prolong(32)
    y = np.linspace(-0.5, 0.5, 257)
    np.testing.assert_allclose(finer(y), profile(y), atol=1e-10)


def test_boundary_argmin_is_reported(pot, caplog):
    """Test the warning when the best scale sits at the end of the scan."""
    estimate_md(pot, 0.05, eps_grid=[0.3, 0.6], profile_dofs=16, max_iter=50)
    assert "scan boundary" in caplog.text


def test_transverse_probe_at_zero_amplitude(cell_q005, pot):
    """Test that a zero modulation reproduces the flat profile energy."""
    report = transverse_probe(pot, 0.05, cell_q005.profile, [0.0, 0.05, 0.1])

    assert report.base_energy == pytest.approx(profile_energy(cell_q005.profile, pot, 0.05), rel=1e-10)
    assert report.rows[0] == (0.0, report.base_energy)
    assert all(math.isfinite(e) for _, e in report.rows)
    # the flat profile is optimal among these modulations at small q
    assert not report.improves
