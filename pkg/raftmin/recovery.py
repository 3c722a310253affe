"""Recovery fields for the sharp-interface limit.

A slab interface is recovered by rescaling an optimal cell profile; a polygon
glues that profile along each edge onto a mollified indicator with C^3
smoothstep cut-offs that vanish near the vertices.
"""
import logging
import math
from typing import Dict

import numpy as np
from scipy import integrate, ndimage

from raftmin.cell import CellProfile
from raftmin.exceptions import GeometryError
from raftmin.geometry import InterfaceGeometry, is_wall_edge, on_wall
from raftmin.grid import Grid, ScalarField, integrate_values
from raftmin.models import GeometryKind
from raftmin.operators import derivative_values

logger = logging.getLogger(__name__)

# largest profile departure from +-1 tolerated where a slab meets a wall
WALL_TOL = 1e-3

_SPHERE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


def _bump(r2):
    r2 = np.asarray(r2, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.where(r2 < 1.0, np.exp(-1.0 / (1.0 - r2)), 0.0)


def _radial_integral(d: int) -> float:
    value, _ = integrate.quad(lambda r: r ** (d - 1) * float(_bump(r * r)), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)
    return _SPHERE[d] * value


def mollifier_constant(d: int) -> float:
    """C with C * int_{|y|<1} exp(-1/(1-|y|^2)) dy = 1."""
    return 1.0 / _radial_integral(d)


def mollifier_mass(d: int) -> float:
    return mollifier_constant(d) * _radial_integral(d)


def mollifier_kernel(grid: Grid, eps: float) -> np.ndarray:
    """Discrete kernel of Psi_eps renormalized to unit mass.

    Axes coarser than eps keep only the central stencil slice.
    """
    radii = [int(math.floor(eps / h)) for h in grid.spacing]
    offsets = np.meshgrid(*[np.arange(-r, r + 1) * h for r, h in zip(radii, grid.spacing)], indexing="ij")
    r2 = sum((o / eps) ** 2 for o in offsets)
    kernel = _bump(r2)
    return kernel / kernel.sum()


def _check_resolution(grid: Grid, geometry: InterfaceGeometry, eps: float) -> None:
    for axis in geometry.varying_axes(grid):
        if eps < 2.0 * grid.spacing[axis]:
            raise GeometryError(f"eps={eps} is below twice the grid spacing {grid.spacing[axis]:.4g} on axis {axis}")


def mollify_indicator(geometry: InterfaceGeometry, grid: Grid, eps: float) -> ScalarField:
    """(chi_P - chi_P^c) * Psi_eps; exactly +-1 farther than eps from the interface."""
    _check_resolution(grid, geometry, eps)
    sharp = geometry.sharp_indicator(grid)
    smooth = ndimage.convolve(sharp, mollifier_kernel(grid, eps), mode="reflect")
    return ScalarField(grid, np.clip(smooth, -1.0, 1.0))


def _profile_reach(profile: CellProfile, eps0: float, eps: float) -> float:
    return profile.core_halfwidth() * eps / eps0


def build_recovery(geometry: InterfaceGeometry, profile: CellProfile, eps0: float, eps: float,
                   grid: Grid) -> ScalarField:
    """w(eps0 (x_axis - offset) / eps) for a flat slab; +1 on the negative side."""
    if geometry.kind != GeometryKind.FLAT_SLAB:
        raise GeometryError("build_recovery handles flat slabs; use glue_polygon for polygons")
    geometry.validate(grid)
    half = eps / (2.0 * eps0)
    room = geometry.wall_distance(grid)
    if half > room:
        y = eps0 * room / eps
        gap = float(np.max(np.abs(profile(np.array([-y, y])) - np.array([1.0, -1.0]))))
        if gap > WALL_TOL:
            raise GeometryError(f"Recovery slab of half-width {half:.4g} exceeds the domain "
                                f"(wall distance {room:.4g}, profile gap {gap:.2e})")
        logger.info(f"Recovery slab half-width {half:.4g} truncated at the walls, profile gap {gap:.2e}")
    x = grid.mesh()[geometry.axis]
    return ScalarField(grid, profile(eps0 * (x - geometry.offset) / eps))


def smoothstep(t):
    """C^3 step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)


def glue_polygon(geometry: InterfaceGeometry, profile: CellProfile, eps0: float, eps: float, grid: Grid,
                 corner_delta: float = 0.2) -> ScalarField:
    """phi_eps + sum_i eta_i (w_i - phi_eps) with edge strips w_i of the cell profile.

    Each eta_i is a smoothstep cut-off that is one on the strip core, zero
    within corner_delta of the edge's corners and zero beyond twice the
    profile reach normal to the edge. Edges on a wall carry no strip. An edge
    end on a wall next to such an edge is free: its strip runs into the wall
    and is clipped there, matching the even reflection of the Neumann grid.
    """
    if geometry.kind != GeometryKind.POLYGON_2D:
        raise GeometryError("glue_polygon needs a polygon geometry")
    phi = mollify_indicator(geometry, grid, eps)
    reach = max(_profile_reach(profile, eps0, eps), eps)
    if corner_delta < 2.0 * reach:
        raise GeometryError(f"corner_delta={corner_delta} is below twice the strip reach {reach:.4g}")
    verts = geometry.vertices
    m = len(verts)
    touching = [on_wall(v, grid) for v in verts]
    lo = np.array(grid.origin)
    hi = lo + np.array(grid.extents)
    for v, touches in zip(verts, touching):
        if not touches and min(np.min(v - lo), np.min(hi - v)) <= 2.0 * reach:
            raise GeometryError(f"Polygon vertex ({v[0]:.4g}, {v[1]:.4g}) lies within the strip reach "
                                f"{2 * reach:.4g} of a wall")
    wall_edges = [is_wall_edge(verts[i], verts[(i + 1) % m], grid) for i in range(m)]

    X, Y = grid.mesh()
    values = np.array(phi.values)
    for i in range(m):
        if wall_edges[i]:
            continue
        p, q = verts[i], verts[(i + 1) % m]
        cut_start = not (touching[i] and wall_edges[i - 1])
        cut_end = not (touching[(i + 1) % m] and wall_edges[(i + 1) % m])
        length = float(np.hypot(*(q - p)))
        if length < 2.0 * corner_delta * (cut_start + cut_end):
            raise GeometryError(f"Edge of length {length:.4g} is too short for {cut_start + cut_end} corner "
                                f"cut-offs of width {corner_delta}")
        tx, ty = (q - p) / length
        # outward normal of a counter-clockwise polygon
        nx, ny = ty, -tx
        s = (X - p[0]) * tx + (Y - p[1]) * ty
        dist = (X - p[0]) * nx + (Y - p[1]) * ny
        eta = 1.0 - smoothstep((np.abs(dist) - reach) / reach)
        if cut_start:
            eta = eta * smoothstep((s - corner_delta) / corner_delta)
        if cut_end:
            eta = eta * smoothstep((length - corner_delta - s) / corner_delta)
        values += eta * (profile(eps0 * dist / eps) - phi.values)
    return ScalarField(grid, values)


def derivative_bounds(field: ScalarField, geometry: InterfaceGeometry, eps: float, max_order: int = 3) -> Dict[int, float]:
    """eps^s max |d^s field| along the axes the interface varies in, s = 1..max_order."""
    grid = field.grid
    bounds = {}
    for s in range(1, max_order + 1):
        worst = 0.0
        for axis in geometry.varying_axes(grid):
            orders = tuple(s if a == axis else 0 for a in range(grid.d))
            worst = max(worst, float(np.max(np.abs(derivative_values(grid, field.values, orders)))))
        bounds[s] = eps**s * worst
    return bounds


def l2_to_sharp(field: ScalarField, geometry: InterfaceGeometry) -> float:
    diff = field.values - geometry.sharp_indicator(field.grid)
    return math.sqrt(integrate_values(field.grid, diff**2))
