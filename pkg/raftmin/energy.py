"""Nonlocal raft functionals, single-mode closed forms and inequality probes.

F_star acts on the composition u; F_v acts on v = (1 - eps^2 Laplace)^{-1} u
with u = v - eps^2 Laplace v. Both agree exactly per mode on the discrete
grid, which the tests use as an oracle.
"""
import logging
import math
from typing import Iterable, List, Optional, Tuple

import numpy as np

from raftmin.exceptions import UnboundedBelowError
from raftmin.grid import Grid, Region, ScalarField, backward, band_mask, forward, integrate_values
from raftmin.models import Boundary
from raftmin.operators import gradient_sq_values, helmholtz_inverse_values, hessian_sq_values, laplacian_values
from raftmin.potential import Potential, estimate_constants
from raftmin.schemas import EnergyBreakdown, EnergyParams, LowerBoundReport, ModeRow, PotentialConstants

logger = logging.getLogger(__name__)

FLUX_TOL = 0.1


def F_star(u: ScalarField, p: EnergyParams, pot: Potential) -> EnergyBreakdown:
    grid, eps, q = u.grid, p.eps, p.q
    values = u.values
    v = helmholtz_inverse_values(grid, values, eps)
    return EnergyBreakdown(
        potential=integrate_values(grid, pot.W(values)) / eps,
        negative_quadratic_or_gradient=-integrate_values(grid, values**2) / eps,
        gradient=(1.0 - q) * eps * integrate_values(grid, gradient_sq_values(grid, values)),
        nonlocal_=integrate_values(grid, values * v) / eps,
    )


def boundary_flux(v: ScalarField) -> float:
    """Largest one-sided estimate of the normal derivative on the walls.

    Fits a quadratic through the three cell centres next to each wall.
    """
    grid = v.grid
    if grid.boundary != Boundary.NEUMANN:
        return 0.0
    worst = 0.0
    for axis in range(grid.d):
        h = grid.spacing[axis]
        x = np.moveaxis(v.values, axis, 0)
        low = (-2.0 * x[0] + 3.0 * x[1] - x[2]) / h
        high = (2.0 * x[-1] - 3.0 * x[-2] + x[-3]) / h
        worst = max(worst, float(np.max(np.abs(low))), float(np.max(np.abs(high))))
    return worst


def F_v(v: ScalarField, p: EnergyParams, pot: Potential, region: Optional[Region] = None,
        check_flux: bool = True, flux_tol: float = FLUX_TOL) -> EnergyBreakdown:
    """Energy in the v formulation; infinite unless the wall flux vanishes.

    The flux gate only applies on full Neumann domains.
    """
    grid, eps, q = v.grid, p.eps, p.q
    values = v.values
    if check_flux and region is None and grid.boundary == Boundary.NEUMANN:
        flux = boundary_flux(v)
        scale = float(np.sqrt(np.max(gradient_sq_values(grid, values))))
        if flux > flux_tol * scale + 1e-9:
            msg = f"Neumann flux violation: wall derivative {flux:.3e} vs max |grad v| {scale:.3e}"
            logger.warning(msg)
            return EnergyBreakdown(finite=False, diagnostic=msg)
    lap = laplacian_values(grid, values)
    u = values - eps**2 * lap
    return EnergyBreakdown(
        potential=integrate_values(grid, pot.W(u), region) / eps,
        negative_quadratic_or_gradient=-eps * q * integrate_values(grid, gradient_sq_values(grid, values), region),
        laplacian_sq=(1.0 - 2.0 * q) * eps**3 * integrate_values(grid, lap**2, region),
        grad_laplacian_sq=(1.0 - q) * eps**5 * integrate_values(grid, gradient_sq_values(grid, lap), region),
    )


def modica_mortola(u: ScalarField, eps: float, pot: Potential, region: Optional[Region] = None) -> float:
    grid = u.grid
    return (integrate_values(grid, pot.W(u.values), region) / eps
            + eps * integrate_values(grid, gradient_sq_values(grid, u.values), region))


def I_eps(v: ScalarField, eps: float, pot: Potential, region: Optional[Region] = None) -> float:
    """Control functional: W(v)/eps + eps|grad v|^2 + eps^3|D^2 v|^2 + eps^5|grad Laplace v|^2."""
    grid, values = v.grid, v.values
    lap = laplacian_values(grid, values)
    return (integrate_values(grid, pot.W(values), region) / eps
            + eps * integrate_values(grid, gradient_sq_values(grid, values), region)
            + eps**3 * integrate_values(grid, hessian_sq_values(grid, values), region)
            + eps**5 * integrate_values(grid, gradient_sq_values(grid, lap), region))


def mode_multiplier(q: float, t):
    """-1 + (1-q) t + 1/(1+t) with t = eps^2 lambda^2."""
    return -1.0 + (1.0 - q) * t + 1.0 / (1.0 + t)


def mode_energy(q: float, eps: float, n: int, wavenumber: Optional[float] = None) -> Tuple[float, bool]:
    """Single-mode energy F_qn; the wavenumber defaults to 2 pi n."""
    lam = 2.0 * math.pi * n if wavenumber is None else wavenumber
    value = float(mode_multiplier(q, (eps * lam) ** 2))
    return value, value < 0


def optimal_mode(q: float, eps: float) -> Tuple[float, float]:
    """(lambda*^2, F*) of the continuum single-mode problem."""
    if q >= 1:
        raise UnboundedBelowError(q)
    if q <= 0:
        return 0.0, 0.0
    t_star = 1.0 / math.sqrt(1.0 - q) - 1.0
    return t_star / eps**2, -2.0 + 2.0 * math.sqrt(1.0 - q) + q


def mode_table(q: float, eps: float, nmax: int) -> List[ModeRow]:
    rows = []
    for n in range(1, nmax + 1):
        lam = 2.0 * math.pi * n
        value, destab = mode_energy(q, eps, n)
        rows.append(ModeRow(n=n, wavenumber=lam, eps2_lambda2=(eps * lam) ** 2, F_qn=value, destabilizing=destab))
    best = min(range(len(rows)), key=lambda i: rows[i].F_qn)
    rows[best] = rows[best].model_copy(update={"is_min": True})
    return rows


def variational_derivative_values(grid: Grid, values: np.ndarray, p: EnergyParams, pot: Potential) -> np.ndarray:
    eps, q = p.eps, p.q
    lap = laplacian_values(grid, values)
    v = helmholtz_inverse_values(grid, values, eps)
    return (pot.W1(values) - 2.0 * values - 2.0 * (1.0 - q) * eps**2 * lap + 2.0 * v) / eps


def variational_derivative(u: ScalarField, p: EnergyParams, pot: Potential) -> ScalarField:
    """L2 gradient of F_star: (1/eps)[W'(u) - 2u - 2(1-q) eps^2 Laplace u + 2 v]."""
    return ScalarField(u.grid, variational_derivative_values(u.grid, u.values, p, pot))


def interpolation_ratio(v: ScalarField, eps: float, pot: Potential) -> float:
    grid, values = v.grid, v.values
    grad = eps * integrate_values(grid, gradient_sq_values(grid, values))
    control = (integrate_values(grid, pot.W(values)) / eps
               + eps**3 * integrate_values(grid, hessian_sq_values(grid, values)))
    return grad / control if control > 0 else 0.0


def interpolation_probe(fields: Iterable[ScalarField], eps: float, pot: Potential) -> float:
    """q*-estimate min(1, 1/sup ratio) of gradient energy over its controls."""
    sup = max((interpolation_ratio(v, eps, pot) for v in fields), default=0.0)
    q_star = 1.0 if sup <= 1.0 else 1.0 / sup
    logger.info(f"Interpolation probe at eps={eps}: sup ratio {sup:.4g}, q* estimate {q_star:.4g}")
    return q_star


def q0_from_constants(q_star: float, K_w: float, C_w: float) -> float:
    return q_star / (2.0 * q_star + 4.0 * K_w + 4.0 * C_w**2 + 10.0)


def probe_corpus(grid: Grid, n_fields: int = 20, seed: int = 0, band: Optional[int] = None,
                 amplitude: float = 1.0) -> List[ScalarField]:
    """Band-limited random fields around the wells used to estimate probe constants."""
    rng = np.random.default_rng(seed)
    band = band or max(1, min(grid.n) // 16)
    mask = band_mask(grid, band)
    fields = []
    for _ in range(n_fields):
        coeffs = rng.standard_normal(grid.shape) * mask
        coeffs[(0,) * grid.d] = 0.0
        values = backward(grid, coeffs)
        values *= amplitude / max(float(np.max(np.abs(values))), 1e-300)
        values += rng.choice([-1.0, 0.0, 1.0])
        fields.append(ScalarField(grid, values))
    return fields


def lower_bound_check(v: ScalarField, p: EnergyParams, pot: Potential, q_star: float, c_omega: float,
                      constants: Optional[PotentialConstants] = None) -> LowerBoundReport:
    """Evaluate both sides of F[v] >= q I[v] - (12 q / q*) C eps^3 |Omega|.

    A negative margin beyond round-off falsifies the inequality for the
    supplied constants.
    """
    constants = constants or estimate_constants(pot)
    eps, q = p.eps, p.q
    lhs = F_v(v, p, pot).total
    control = I_eps(v, eps, pot)
    rhs = q * control - (12.0 * q / q_star) * c_omega * eps**3 * v.grid.volume
    margin = lhs - rhs
    q0 = q0_from_constants(q_star, constants.K_w, constants.C_w)
    holds = margin >= -1e-12 * (1.0 + abs(lhs) + abs(rhs))
    if q > q0:
        logger.warning(f"q={q} exceeds the estimated admissible q0={q0:.3e}")
    if not holds:
        logger.warning(f"Lower bound falsified: margin {margin:.3e} at eps={eps}, q={q}")
    return LowerBoundReport(lhs=lhs, rhs=rhs, margin=margin, I_eps=control, q=q, q_star=q_star, c_omega=c_omega,
                            q0=q0, q_admissible=q <= q0, holds=bool(holds))


def quadratic_mode_energy(grid: Grid, values: np.ndarray, p: EnergyParams) -> float:
    """(1/eps) sum_k mode_multiplier(q, eps^2 lambda_k^2) c_k^2, the quadratic part of F_star."""
    coeffs = forward(grid, values)
    t = p.eps**2 * grid.eigenvalues
    return float(np.sum(mode_multiplier(p.q, t) * coeffs**2) / p.eps)


def effective_mode_energy(u: ScalarField, p: EnergyParams) -> float:
    """eps times the quadratic part of F_star over ||u||^2; equals F_qn when u is a single mode."""
    norm_sq = integrate_values(u.grid, u.values**2)
    if norm_sq == 0:
        return 0.0
    return p.eps * quadratic_mode_energy(u.grid, u.values, p) / norm_sq
