"""Desk-scale comparison of recovery energies with m_d times the perimeter."""
import logging
import math
from typing import Optional, Sequence, Tuple

from raftmin.cell import CellResult, estimate_from_spec, profile_energy
from raftmin.energy import F_v
from raftmin.exceptions import GeometryError, NumericalError
from raftmin.geometry import InterfaceGeometry, perimeter
from raftmin.grid import Grid, ScalarField
from raftmin.models import GeometryKind
from raftmin.potential import Potential, mm_floor
from raftmin.recovery import build_recovery, glue_polygon, l2_to_sharp
from raftmin.schemas import CellSpec, EnergyParams, GammaRow, GammaTable, PolygonReport
from raftmin.sweep import run_sweep

logger = logging.getLogger(__name__)


def recovery_field(geometry: InterfaceGeometry, cell: CellResult, eps: float, grid: Grid,
                   corner_delta: float = 0.2) -> ScalarField:
    if geometry.kind == GeometryKind.FLAT_SLAB:
        return build_recovery(geometry, cell.profile, cell.eps_argmin, eps, grid)
    return glue_polygon(geometry, cell.profile, cell.eps_argmin, eps, grid, corner_delta)


def classify_trend(gaps: Sequence[float], floor: float = 1e-6,
                   saturation_tol: float = 1e-5) -> Tuple[bool, bool]:
    """(decreasing, saturated) for the gaps |r - 1| along decreasing eps.

    Gaps that all sit below ``saturation_tol`` are saturated: the ratio is one
    to grid accuracy and carries no trend. Otherwise each gap has to stay
    below its predecessor plus the round-off ``floor``.
    """
    gaps = list(gaps)
    saturated = bool(gaps) and max(gaps) <= saturation_tol
    decreasing = (not saturated and len(gaps) >= 2
                  and all(b <= a + floor for a, b in zip(gaps, gaps[1:])))
    return decreasing, saturated


def gamma_compare(geometry: InterfaceGeometry, pot: Potential, q: float, eps_list: Sequence[float], grid: Grid,
                  cell: Optional[CellResult] = None, cell_spec: Optional[CellSpec] = None,
                  trend_floor: float = 1e-6, saturation_tol: float = 1e-5, final_tol: float = 0.15,
                  corner_delta: float = 0.2,
                  max_workers: Optional[int] = None) -> GammaTable:
    """Energy of the recovery field against m_d Per for decreasing eps.

    The trend and saturation flags come from ``classify_trend``; the final
    check asks |r - 1| <= final_tol at the smallest eps.
    """
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    if not eps_list:
        raise GeometryError("gamma_compare needs at least one eps")
    if cell is None:
        cell = estimate_from_spec(pot, q, cell_spec or CellSpec())
    per = perimeter(geometry, grid)
    md_per = cell.md * per
    if not md_per > 0:
        raise NumericalError(f"m_d * Per = {md_per:.6g} is not positive at q={q}")

    def evaluate(eps: float) -> GammaRow:
        field = recovery_field(geometry, cell, eps, grid, corner_delta)
        energy = F_v(field, EnergyParams(eps=eps, q=q), pot).total
        ratio = energy / md_per
        logger.info(f"gamma eps={eps}: energy {energy:.10g}, ratio {ratio:.6f}")
        return GammaRow(eps=eps, energy=energy, md_times_per=md_per, ratio=ratio, residual=ratio - 1.0,
                        l2_to_sharp=l2_to_sharp(field, geometry))

    rows = run_sweep(evaluate, eps_list, max_workers, label="gamma")
    gaps = [abs(r.residual) for r in rows]
    trend_ok, saturated = classify_trend(gaps, trend_floor, saturation_tol)
    final_ok = gaps[-1] <= final_tol
    rate = None
    if len(rows) >= 2 and gaps[-1] > 0 and gaps[-2] > 0:
        rate = math.log(gaps[-1] / gaps[-2]) / math.log(rows[-1].eps / rows[-2].eps)
    if saturated:
        logger.info(f"Recovery gaps {[f'{g:.2e}' for g in gaps]} are saturated at grid accuracy")
    elif not (trend_ok and final_ok):
        logger.warning(f"Recovery ratios {[round(r.ratio, 6) for r in rows]} miss the trend or final tolerance")
    return GammaTable(rows=rows, md=cell.md, perimeter=per, eps0=cell.eps_argmin, trend_ok=trend_ok,
                      saturated=saturated, final_ok=final_ok, observed_rate=rate)


def polygon_report(geometry: InterfaceGeometry, pot: Potential, q: float, eps: float, grid: Grid,
                   cell: CellResult, corner_delta: float = 0.2, rho: Optional[float] = None) -> PolygonReport:
    """Bookkeeping of the glued polygon energy against (m_d + rho) Per.

    rho defaults to how far the gluing profile's own cell energy sits above m_d.
    """
    field = glue_polygon(geometry, cell.profile, cell.eps_argmin, eps, grid, corner_delta)
    energy = F_v(field, EnergyParams(eps=eps, q=q), pot).total
    per = perimeter(geometry, grid)
    if rho is None:
        rho = max(0.0, profile_energy(cell.profile, pot, q) - cell.md)
    bound = (cell.md + rho) * per
    return PolygonReport(eps=eps, energy=energy, md_plus_rho_times_per=bound, corner_allowance=energy - bound,
                         ratio=energy / (cell.md * per))


def floor_check(md: float, q: float, pot: Potential, slack: float = 0.02) -> Tuple[float, bool]:
    """(q * int sqrt(W), md >= floor (1 - slack))."""
    floor = q * mm_floor(pot)
    holds = md >= floor * (1.0 - slack)
    if not holds:
        logger.warning(f"m_d estimate {md:.6g} below the floor {floor:.6g} at q={q}")
    return floor, holds


def nu_independence(pot: Potential, q: float, cell: CellResult, eps: float, grid: Grid) -> float:
    """Relative gap between slab recovery energies along axis 0 and axis 1 of a square grid."""
    if grid.d < 2 or grid.extents[0] != grid.extents[1] or grid.n[0] != grid.n[1]:
        raise GeometryError(f"Normal-independence probe needs a square grid, got {grid!r}")
    p = EnergyParams(eps=eps, q=q)
    energies = []
    for axis in (0, 1):
        slab = InterfaceGeometry(GeometryKind.FLAT_SLAB, axis=axis, offset=grid.origin[axis] + grid.extents[axis] / 2)
        energies.append(F_v(build_recovery(slab, cell.profile, cell.eps_argmin, eps, grid), p, pot).total)
    gap = abs(energies[0] - energies[1]) / max(abs(energies[0]), 1e-300)
    logger.info(f"Slab energies along x and y: {energies[0]:.10g}, {energies[1]:.10g} (gap {gap:.2e})")
    return gap
