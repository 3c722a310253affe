"""Physical membrane energy, its nondimensionalization and the elimination of h.

Everything is per unit area in dimensionless box coordinates: physical lengths
are L times grid lengths, so each derivative carries a factor 1/L.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence

from raftmin.energy import F_star
from raftmin.grid import ScalarField, backward, forward, integrate_values
from raftmin.operators import gradient_sq_values, laplacian_values
from raftmin.potential import physical_f, to_W
from raftmin.schemas import EnergyParams, LongwaveReport, NondimResult, PhysicalParams, ReductionReport
from raftmin.sweep import run_sweep

logger = logging.getLogger(__name__)

# relative long-wave gap above which the approximation is flagged
LONGWAVE_FLAG = 0.1


def nondimensionalize(p: PhysicalParams) -> NondimResult:
    """eps = sqrt(kappa / (L^2 sigma)), q = 1 - b sigma / Lambda^2, W scale 2 kappa / Lambda^2."""
    return NondimResult(
        sigma=p.sigma,
        eps=math.sqrt(p.kappa / (p.L**2 * p.sigma)),
        q=1.0 - p.b * p.sigma / p.coupling**2,
        w_scale=2.0 * p.kappa / p.coupling**2,
        intrinsic_length=math.sqrt(p.kappa / p.sigma),
    )


def energy_params(p: PhysicalParams) -> EnergyParams:
    nd = nondimensionalize(p)
    return EnergyParams(eps=nd.eps, q=nd.q)


def sigma_sweep(p: PhysicalParams, sigmas: Sequence[float], max_workers: Optional[int] = None) -> List[NondimResult]:
    return run_sweep(lambda s: nondimensionalize(p.model_copy(update={"sigma": float(s)})), sigmas, max_workers,
                     label="sigma sweep")


def solve_height(u: ScalarField, p: PhysicalParams) -> ScalarField:
    """Height minimizing the energy for fixed u, in the zero-mean gauge.

    Mode by mode h_k = Lambda u_k / (sigma + (kappa / L^2) lambda_k^2), h_0 = 0.
    """
    grid = u.grid
    denom = p.sigma + (p.kappa / p.L**2) * grid.eigenvalues
    coeffs = p.coupling * forward(grid, u.values) / denom
    coeffs[(0,) * grid.d] = 0.0
    return ScalarField(grid, backward(grid, coeffs))


def el_residual(u: ScalarField, h: ScalarField, p: PhysicalParams) -> float:
    """Relative L2 residual of Laplace((kappa/L^4) Laplace h - (sigma/L^2) h + (Lambda/L^2) u)."""
    grid = u.grid
    lap_h = laplacian_values(grid, h.values)
    inner = (p.kappa / p.L**4) * lap_h - (p.sigma / p.L**2) * h.values + (p.coupling / p.L**2) * u.values
    r = laplacian_values(grid, inner)
    scale = math.sqrt(integrate_values(grid, ((p.coupling / p.L**2) * laplacian_values(grid, u.values)) ** 2))
    return math.sqrt(integrate_values(grid, r**2)) / (scale if scale > 0 else 1.0)


def hred_residual(u: ScalarField, h: ScalarField, p: PhysicalParams) -> float:
    """Relative size of int (kappa/L^2)(Laplace h)^2 + sigma |grad h|^2 + Lambda u Laplace h."""
    grid = u.grid
    lap_h = laplacian_values(grid, h.values)
    terms = [
        (p.kappa / p.L**2) * integrate_values(grid, lap_h**2),
        p.sigma * integrate_values(grid, gradient_sq_values(grid, h.values)),
        p.coupling * integrate_values(grid, u.values * lap_h),
    ]
    scale = math.fsum(abs(t) for t in terms)
    return abs(math.fsum(terms)) / scale if scale > 0 else 0.0


def full_energy_terms(u: ScalarField, h: ScalarField, p: PhysicalParams) -> Dict[str, float]:
    grid = u.grid
    L = p.L
    lap_h = laplacian_values(grid, h.values)
    return {
        "bulk": integrate_values(grid, physical_f(u.values, p.a2, p.a4)),
        "line_tension": p.b / (2.0 * L**2) * integrate_values(grid, gradient_sq_values(grid, u.values)),
        "bending": p.kappa / (2.0 * L**4) * integrate_values(grid, lap_h**2),
        "surface_tension": p.sigma / (2.0 * L**2) * integrate_values(grid, gradient_sq_values(grid, h.values)),
        "coupling": p.coupling / L**2 * integrate_values(grid, u.values * lap_h),
    }


def full_energy(u: ScalarField, h: ScalarField, p: PhysicalParams) -> float:
    """Physical energy per unit area of the composition u and height h."""
    return math.fsum(full_energy_terms(u, h, p).values())


def reduced_equals_full(u: ScalarField, p: PhysicalParams, tol: float = 1e-8) -> ReductionReport:
    """Check (1/eps)(2 kappa / Lambda^2) E[u, h*(u)] against F_star with the unshifted W."""
    nd = nondimensionalize(p)
    scale = nd.w_scale / nd.eps
    h = solve_height(u, p)
    terms = {k: scale * v for k, v in full_energy_terms(u, h, p).items()}
    full_scaled = math.fsum(terms.values())
    pot, _ = to_W(p.a2, p.a4, p.kappa, p.coupling, normalize=False)
    reduced = F_star(u, EnergyParams(eps=nd.eps, q=nd.q), pot).total
    magnitude = max(math.fsum(abs(t) for t in terms.values()), abs(reduced))
    rel_err = abs(full_scaled - reduced) / magnitude if magnitude > 0 else 0.0
    ok = rel_err <= tol
    if not ok:
        logger.warning(f"Height elimination mismatch {rel_err:.3e}: full {full_scaled:.12g}, reduced {reduced:.12g}, "
                       f"terms {terms}")
    return ReductionReport(full_scaled=full_scaled, reduced=reduced, rel_err=rel_err, ok=ok, terms=terms)


def _local_energy(u: ScalarField, p: PhysicalParams) -> float:
    grid = u.grid
    return (integrate_values(grid, physical_f(u.values, p.a2, p.a4))
            + p.b / (2.0 * p.L**2) * integrate_values(grid, gradient_sq_values(grid, u.values)))


def _longwave_coupling(u: ScalarField, p: PhysicalParams) -> float:
    grid = u.grid
    L, lam2 = p.L, p.coupling**2
    return (-lam2 / (2.0 * L**2 * p.sigma) * integrate_values(grid, gradient_sq_values(grid, u.values))
            + lam2 * p.kappa / (2.0 * L**4 * p.sigma**2) * integrate_values(grid, laplacian_values(grid, u.values) ** 2))


def longwave_energy(u: ScalarField, p: PhysicalParams) -> float:
    """f(u) + (1/2L^2)(b - Lambda^2/sigma)|grad u|^2 + (Lambda^2 kappa / 2 L^4 sigma^2)(Laplace u)^2."""
    return _local_energy(u, p) + _longwave_coupling(u, p)


def longwave_gap(u: ScalarField, p: PhysicalParams) -> LongwaveReport:
    """Gap between the long-wave energy and the exactly reduced one.

    The relative gap is measured against the coupling part of the reduced
    energy; a single mode with t = eps^2 lambda^2 gives exactly t^2.
    """
    terms = full_energy_terms(u, solve_height(u, p), p)
    coupling_part = terms["bending"] + terms["surface_tension"] + terms["coupling"]
    local = _local_energy(u, p)
    approx = _longwave_coupling(u, p)
    gap = approx - coupling_part
    gap_rel = abs(gap) / abs(coupling_part) if coupling_part != 0 else 0.0
    flagged = gap_rel > LONGWAVE_FLAG
    if flagged:
        logger.warning(f"Long-wave approximation off by {gap_rel:.3g} of the coupling energy")
    return LongwaveReport(longwave=local + approx, reduced=local + coupling_part, gap=gap, gap_rel=gap_rel,
                          flagged=flagged)
