import math

import numpy as np
import pytest

from raftmin.energy import (F_star, F_v, I_eps, boundary_flux, effective_mode_energy, interpolation_probe,
                            interpolation_ratio, lower_bound_check, mode_energy, mode_table, modica_mortola,
                            optimal_mode, probe_corpus, q0_from_constants, variational_derivative)
from raftmin.exceptions import UnboundedBelowError
from raftmin.fieldio import cos_mode
from raftmin.grid import ScalarField, integrate, make_grid
from raftmin.models import Boundary
from raftmin.operators import elliptic_probe, helmholtz_inverse
from raftmin.potential import estimate_constants
from raftmin.schemas import EnergyParams


def test_constant_well_has_zero_energy(neumann_2d, pot):
    """Test F_star[1] = F_v[-1] = 0."""
    p = EnergyParams(eps=0.1, q=0.3)
    one = ScalarField(neumann_2d, np.ones(neumann_2d.shape))

    assert F_star(one, p, pot).total == pytest.approx(0.0, abs=1e-12)
    assert F_v(-one, p, pot).total == pytest.approx(0.0, abs=1e-12)


def test_breakdown_total_is_sum_of_terms(neumann_1d, pot, smooth_field):
    breakdown = F_star(smooth_field(neumann_1d, seed=4), EnergyParams(eps=0.1, q=0.2), pot)
    assert breakdown.total == pytest.approx(math.fsum(breakdown.terms().values()), rel=1e-12)


@pytest.mark.parametrize("q", [0.19, 0.5, 0.75])
def test_single_mode_matches_closed_form(neumann_1d, pot, q):
    """Test (F_star - potential) eps = -2 + 2 sqrt(1-q) + q at the optimal mode.

    eps is chosen so that cos(2 pi x) sits exactly at the optimal wavenumber.
    """
    t_star = 1.0 / math.sqrt(1.0 - q) - 1.0
    eps = math.sqrt(t_star) / (2 * math.pi)
    breakdown = F_star(cos_mode(neumann_1d, 1), EnergyParams(eps=eps, q=q), pot)

    expected = -2.0 + 2.0 * math.sqrt(1.0 - q) + q
    assert (breakdown.total - breakdown.potential) * eps == pytest.approx(expected, rel=1e-6)


def test_closed_form_at_three_quarters():
    lam2, f_star = optimal_mode(0.75, 0.05)
    assert 0.05**2 * lam2 == pytest.approx(1.0)
    assert f_star == pytest.approx(-0.25)


def test_optimal_mode_edges():
    """Test q = 0 gives the zero mode and q >= 1 is unbounded below."""
    assert optimal_mode(0.0, 0.1) == (0.0, 0.0)
    assert optimal_mode(0.3, 0.1)[1] < 0
    with pytest.raises(UnboundedBelowError):
        optimal_mode(1.0, 0.1)


def test_mode_table_marks_minimum():
    """Test that n = 3 minimizes F_qn at q = 3/4, eps = 0.05."""
    rows = mode_table(0.75, 0.05, 8)
    best = [r for r in rows if r.is_min]

    assert len(best) == 1 and best[0].n == 3
    assert best[0].F_qn == pytest.approx(mode_energy(0.75, 0.05, 3)[0])
    assert all(r.destabilizing == (r.F_qn < 0) for r in rows)


def test_effective_mode_energy_recovers_F_qn(neumann_1d):
    p = EnergyParams(eps=0.05, q=0.5)
    assert effective_mode_energy(cos_mode(neumann_1d, 2, amplitude=0.3), p) == pytest.approx(
        mode_energy(0.5, 0.05, 2)[0], rel=1e-10)
    assert effective_mode_energy(ScalarField(neumann_1d, np.zeros(128)), p) == 0.0


@pytest.mark.parametrize("eps", [0.02, 0.1])
@pytest.mark.parametrize("q", [-0.5, 0.0, 0.3])
def test_u_and_v_formulations_agree(neumann_1d, pot, smooth_field, eps, q):
    """Test F_star[u] = F_v[(1 - eps^2 Laplace)^-1 u] on band-limited fields."""
    p = EnergyParams(eps=eps, q=q)
    for seed in range(5):
        u = smooth_field(neumann_1d, seed=seed, band=8, offset=0.2)
        star = F_star(u, p, pot).total
        full = F_v(helmholtz_inverse(u, eps), p, pot)

        assert full.finite
        assert full.total == pytest.approx(star, rel=1e-9, abs=1e-9)


def test_flux_violation_is_infinite(neumann_1d, pot):
    """Test that a field with nonzero wall derivative is rejected."""
    v = ScalarField(neumann_1d, neumann_1d.coords(0))
    breakdown = F_v(v, EnergyParams(eps=0.1, q=0.1), pot)

    assert boundary_flux(v) == pytest.approx(1.0, rel=1e-9)
    assert not breakdown.finite
    assert breakdown.total == math.inf
    assert "flux" in breakdown.diagnostic
    # a sub-box integral is not gated
    assert F_v(v, EnergyParams(eps=0.1, q=0.1), pot, region=[(-0.5, 0.5)]).finite


def test_periodic_grids_have_no_flux(periodic_1d):
    assert boundary_flux(cos_mode(periodic_1d, 1)) == 0.0


def test_modica_mortola_of_optimal_profile(pot):
    """Test A_eps[tanh(x / eps)] = 8/3 within 2 percent."""
    grid = make_grid(1, [2.0], [1024], Boundary.NEUMANN)
    eps = 0.02
    u = ScalarField(grid, np.tanh(grid.coords(0) / eps))
    assert modica_mortola(u, eps, pot) == pytest.approx(8.0 / 3.0, rel=0.02)


def test_control_functional_dominates_modica_mortola(neumann_1d, pot, smooth_field):
    v = smooth_field(neumann_1d, seed=2)
    assert I_eps(v, 0.1, pot) >= modica_mortola(v, 0.1, pot) >= 0.0
    assert I_eps(ScalarField(neumann_1d, np.ones(128)), 0.1, pot) == pytest.approx(0.0, abs=1e-12)


def test_variational_derivative_matches_finite_differences(neumann_1d, pot, smooth_field):
    """Test dF[u; phi] against central differences in ten directions."""
    p = EnergyParams(eps=0.1, q=0.3)
    u = smooth_field(neumann_1d, seed=11, band=10, offset=0.3)
    g = variational_derivative(u, p, pot)
    h = 1e-6
    for seed in range(10):
        phi = smooth_field(neumann_1d, seed=100 + seed, band=10)
        fd = (F_star(u + h * phi, p, pot).total - F_star(u - h * phi, p, pot).total) / (2 * h)
        exact = integrate(g * phi)
        assert fd == pytest.approx(exact, rel=1e-6, abs=1e-6)


def test_lower_bound_holds_on_random_fields(pot):
    """Test the lower bound with probed constants at half the admissible q."""
    grid = make_grid(1, [2.0], [128], Boundary.NEUMANN)
    eps = 0.1
    corpus = probe_corpus(grid, n_fields=20, seed=0)
    q_star = interpolation_probe(corpus, eps, pot)
    c_omega = max(elliptic_probe(corpus), 1e-3)
    constants = estimate_constants(pot)

    q0 = q0_from_constants(q_star, constants.K_w, constants.C_w)
    p = EnergyParams(eps=eps, q=0.5 * q0)
    for v in probe_corpus(grid, n_fields=30, seed=7):
        report = lower_bound_check(v, p, pot, q_star, c_omega, constants)
        assert report.holds, report
        assert report.q_admissible


def test_lower_bound_on_constant_well(neumann_1d, pot):
    one = ScalarField(neumann_1d, np.ones(128))
    report = lower_bound_check(one, EnergyParams(eps=0.1, q=0.0), pot, q_star=1.0, c_omega=1.0)
    assert report.holds
    assert report.lhs == pytest.approx(0.0, abs=1e-12)


def test_interpolation_estimate_is_positive(neumann_1d, pot):
    """Test 0 < q* <= 1 and q* = 1 / sup ratio once the sup exceeds one."""
    corpus = probe_corpus(neumann_1d, n_fields=20, seed=3)
    ratios = [interpolation_ratio(v, 0.1, pot) for v in corpus]
    q_star = interpolation_probe(corpus, 0.1, pot)

    assert 0 < q_star <= 1
    assert q_star == pytest.approx(min(1.0, 1.0 / max(ratios)))
    assert interpolation_probe([], 0.1, pot) == 1.0


@pytest.mark.slow
@pytest.mark.parametrize("grid", [make_grid(1, [2.0], [256], Boundary.NEUMANN),
                                  make_grid(2, [2.0, 2.0], [64, 64], Boundary.NEUMANN)], ids=["1d", "2d"])
def test_u_and_v_formulations_agree_on_a_full_corpus(grid, pot):
    """Test F_star[u] = F_v[(1 - eps^2 Laplace)^-1 u] on 50 corpus fields."""
    corpus = probe_corpus(grid, n_fields=50, seed=11, amplitude=0.8)
    for eps in (0.02, 0.1):
        for q in (-0.5, 0.0, 0.3):
            p = EnergyParams(eps=eps, q=q)
            for u in corpus:
                full = F_v(helmholtz_inverse(u, eps), p, pot)
                assert full.finite
                assert full.total == pytest.approx(F_star(u, p, pot).total, rel=1e-9, abs=1e-9)


@pytest.mark.slow
@pytest.mark.parametrize("grid", [make_grid(1, [2.0], [256], Boundary.NEUMANN),
                                  make_grid(2, [2.0, 2.0], [64, 64], Boundary.NEUMANN)], ids=["1d", "2d"])
def test_lower_bound_survives_a_hundred_fields(grid, pot):
    """Test the lower bound at q = q0 / 2 with constants estimated on 20 fields and checked on 100 others."""
    eps = 0.1
    fitting = probe_corpus(grid, n_fields=20, seed=0)
    q_star = interpolation_probe(fitting, eps, pot)
    c_omega = max(elliptic_probe(fitting), 1e-3)
    constants = estimate_constants(pot)
    q0 = q0_from_constants(q_star, constants.K_w, constants.C_w)

    assert 0 < q_star <= 1
    assert q0 > 0
    p = EnergyParams(eps=eps, q=0.5 * q0)
    for v in probe_corpus(grid, n_fields=100, seed=101):
        report = lower_bound_check(v, p, pot, q_star, c_omega, constants)
        assert report.holds, report
        assert report.q_admissible
