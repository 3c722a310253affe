import math

import numpy as np
import pytest
from pydantic import ValidationError

from raftmin.fieldio import cos_mode
from raftmin.grid import ScalarField
from raftmin.physical import (el_residual, energy_params, full_energy, hred_residual, longwave_energy, longwave_gap,
                              nondimensionalize, reduced_equals_full, sigma_sweep, solve_height)
from raftmin.schemas import PhysicalParams, membrane_data, sigma_window


@pytest.fixture
def membrane():
    return PhysicalParams.characteristic()


@pytest.mark.parametrize("sigma, q", [(5e-6, 0.8959), (1e-4, -1.0825)])
def test_characteristic_q_values(sigma, q):
    result = nondimensionalize(PhysicalParams.characteristic(sigma=sigma))
    assert result.q == pytest.approx(q, abs=1e-4)


def test_characteristic_scales(membrane):
    """Test eps = 0.01 at sigma = 1e-5 on a 10 micrometre sample."""
    result = nondimensionalize(membrane)

    assert result.eps == pytest.approx(0.01)
    assert result.w_scale == pytest.approx(2e-19 / 4.9e-12**2)
    assert result.intrinsic_length == pytest.approx(1e-7)
    assert energy_params(membrane).eps == result.eps


def test_sigma_sweep_keeps_order(membrane):
    sigmas = [1e-4, 5e-6, 2e-5]
    results = sigma_sweep(membrane, sigmas, max_workers=2)
    assert [r.sigma for r in results] == sigmas
    assert results[0].q < results[2].q < results[1].q


def test_strict_mode_enforces_the_sigma_window():
    with pytest.raises(ValidationError):
        PhysicalParams.characteristic(sigma=1e-3, strict=True)
    assert PhysicalParams.characteristic(sigma=1e-3).sigma == 1e-3


def test_sigma_window_comes_from_the_bundled_table():
    lo, hi = sigma_window()
    assert (lo, hi) == (membrane_data()["sigma_range"]["low"], membrane_data()["sigma_range"]["high"])
    assert (lo, hi) == (5e-6, 1e-4)
    assert PhysicalParams.characteristic(sigma=lo, strict=True).sigma == lo
    assert PhysicalParams.characteristic(sigma=hi, strict=True).sigma == hi
    with pytest.raises(ValidationError):
        PhysicalParams.characteristic(sigma=0.5 * lo, strict=True)


def test_zero_coupling_is_rejected():
    with pytest.raises(ValidationError):
        PhysicalParams.characteristic(coupling=0.0)


def test_height_solves_the_euler_lagrange_equation(neumann_1d, membrane, smooth_field):
    u = smooth_field(neumann_1d, seed=3, band=10)
    h = solve_height(u, membrane)

    assert el_residual(u, h, membrane) < 1e-10
    assert hred_residual(u, h, membrane) < 1e-10
    assert h.mean() == pytest.approx(0.0, abs=1e-12)


def test_height_minimizes_the_full_energy(neumann_1d, membrane, smooth_field):
    u = smooth_field(neumann_1d, seed=5, band=8)
    h = solve_height(u, membrane)
    base = full_energy(u, h, membrane)
    scale = float(np.max(np.abs(h.values)))
    for seed in range(3):
        bump = smooth_field(neumann_1d, seed=50 + seed, band=8)
        assert full_energy(u, ScalarField(h.grid, h.values + 0.1 * scale * bump.values), membrane) > base


def test_reduced_energy_equals_full_energy(neumann_1d, smooth_field):
    """Test that eliminating h reproduces F_star with the unshifted W."""
    for sigma in (5e-6, 1e-5, 1e-4):
        p = PhysicalParams.characteristic(sigma=sigma)
        for seed in range(3):
            report = reduced_equals_full(smooth_field(neumann_1d, seed=seed, band=10, offset=0.1), p)
            assert report.ok, report
            assert set(report.terms) == {"bulk", "line_tension", "bending", "surface_tension", "coupling"}


def test_longwave_gap_of_a_single_mode(neumann_1d, membrane):
    """Test gap_rel = t^2 with t = eps^2 lambda^2 for cos(2 pi n x)."""
    eps = nondimensionalize(membrane).eps
    for n, flagged in ((1, False), (10, True)):
        t = (eps * 2 * math.pi * n) ** 2
        report = longwave_gap(cos_mode(neumann_1d, n), membrane)
        assert report.gap_rel == pytest.approx(t**2, rel=1e-6)
        assert report.flagged == flagged
        assert report.longwave - report.reduced == pytest.approx(report.gap)


def test_longwave_energy_matches_the_gap_report(neumann_1d, membrane, smooth_field):
    u = smooth_field(neumann_1d, seed=4, band=6)
    assert longwave_energy(u, membrane) == pytest.approx(longwave_gap(u, membrane).longwave, rel=1e-12)
