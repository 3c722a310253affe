"""Sharp interfaces on rectangular grids: flat slabs and 2D polygons.

The +1 phase lies on the negative side of a slab (x_axis < offset) and inside
a polygon.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from raftmin.exceptions import GeometryError
from raftmin.grid import Grid
from raftmin.models import GeometryKind
from raftmin.schemas import GammaSpec

logger = logging.getLogger(__name__)

Point = Tuple[float, float]


def _orient(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    return float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def _on_segment(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> bool:
    return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])


def segments_intersect(p1, p2, p3, p4) -> bool:
    p1, p2, p3, p4 = (np.asarray(p, dtype=float) for p in (p1, p2, p3, p4))
    d1, d2 = _orient(p3, p4, p1), _orient(p3, p4, p2)
    d3, d4 = _orient(p1, p2, p3), _orient(p1, p2, p4)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and 0 not in (d1, d2, d3, d4):
        return True
    return ((d1 == 0 and _on_segment(p3, p4, p1)) or (d2 == 0 and _on_segment(p3, p4, p2))
            or (d3 == 0 and _on_segment(p1, p2, p3)) or (d4 == 0 and _on_segment(p1, p2, p4)))


def signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def clipped_length(p: Sequence[float], q: Sequence[float], lo: Sequence[float], hi: Sequence[float]) -> float:
    """Length of the segment pq inside the box [lo, hi] (Liang-Barsky)."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    delta = q - p
    t0, t1 = 0.0, 1.0
    for axis in range(2):
        for num, den in ((p[axis] - lo[axis], -delta[axis]), (hi[axis] - p[axis], delta[axis])):
            if den == 0:
                if num < 0:
                    return 0.0
                continue
            t = num / den
            if den < 0:
                t0 = max(t0, t)
            else:
                t1 = min(t1, t)
    return max(0.0, t1 - t0) * float(np.hypot(*delta))


class InterfaceGeometry:
    """A flat slab orthogonal to ``axis`` at ``offset``, or a simple polygon in 2D."""

    def __init__(self, kind: GeometryKind, axis: int = 0, offset: float = 0.0,
                 vertices: Optional[Sequence[Point]] = None):
        self.kind = GeometryKind(kind)
        self.axis = int(axis)
        self.offset = float(offset)
        self.vertices: Optional[np.ndarray] = None
        if self.kind == GeometryKind.POLYGON_2D:
            if vertices is None or len(vertices) < 3:
                raise GeometryError("A polygon needs at least three vertices")
            verts = np.asarray(vertices, dtype=float)
            if verts.ndim != 2 or verts.shape[1] != 2:
                raise GeometryError("Polygon vertices must be (x, y) pairs")
            area = signed_area(verts)
            if abs(area) < 1e-14:
                raise GeometryError("Polygon has zero area")
            if not self._is_simple(verts):
                raise GeometryError("Polygon edges intersect")
            # counter-clockwise, so outward normals point right of each edge
            self.vertices = verts if area > 0 else verts[::-1].copy()

    @staticmethod
    def _is_simple(verts: np.ndarray) -> bool:
        m = len(verts)
        for i in range(m):
            for j in range(i + 1, m):
                if j == i + 1 or (i == 0 and j == m - 1):
                    continue
                if segments_intersect(verts[i], verts[(i + 1) % m], verts[j], verts[(j + 1) % m]):
                    return False
        return True

    @classmethod
    def from_spec(cls, spec: GammaSpec) -> "InterfaceGeometry":
        return cls(spec.geometry, spec.axis, spec.offset, spec.vertices)

    def edges(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        if self.vertices is None:
            return []
        m = len(self.vertices)
        return [(self.vertices[i], self.vertices[(i + 1) % m]) for i in range(m)]

    def varying_axes(self, grid: Grid) -> Tuple[int, ...]:
        return (self.axis,) if self.kind == GeometryKind.FLAT_SLAB else tuple(range(grid.d))

    def validate(self, grid: Grid) -> None:
        if self.kind == GeometryKind.FLAT_SLAB:
            if self.axis >= grid.d:
                raise GeometryError(f"Slab axis {self.axis} on a {grid.d}-dimensional grid")
            lo = grid.origin[self.axis]
            if not lo < self.offset < lo + grid.extents[self.axis]:
                raise GeometryError(f"Slab offset {self.offset} outside the domain along axis {self.axis}")
            return
        if grid.d != 2:
            raise GeometryError("Polygon interfaces need a 2D grid")
        lo = np.array(grid.origin)
        hi = lo + np.array(grid.extents)
        if np.any(self.vertices < lo - 1e-12) or np.any(self.vertices > hi + 1e-12):
            raise GeometryError("Polygon vertices must lie in the closed domain")

    def wall_distance(self, grid: Grid) -> float:
        """Distance from the interface to the nearest wall it does not cross."""
        if self.kind == GeometryKind.FLAT_SLAB:
            lo = grid.origin[self.axis]
            return min(self.offset - lo, lo + grid.extents[self.axis] - self.offset)
        lo = np.array(grid.origin)
        hi = lo + np.array(grid.extents)
        return float(min(np.min(self.vertices - lo), np.min(hi - self.vertices)))

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Even-odd ray casting, vectorized over points."""
        inside = np.zeros(np.shape(x), dtype=bool)
        for (x1, y1), (x2, y2) in self.edges():
            crosses = (y1 > y) != (y2 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < xint)
        return inside

    def sharp_indicator(self, grid: Grid) -> np.ndarray:
        self.validate(grid)
        if self.kind == GeometryKind.FLAT_SLAB:
            x = grid.mesh()[self.axis]
            return np.where(x < self.offset, 1.0, -1.0)
        X, Y = grid.mesh()
        return np.where(self.contains(X, Y), 1.0, -1.0)

    def __repr__(self) -> str:
        if self.kind == GeometryKind.FLAT_SLAB:
            return f"InterfaceGeometry(flat_slab, axis={self.axis}, offset={self.offset})"
        return f"InterfaceGeometry(polygon_2d, {len(self.vertices)} vertices)"


def _box(grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    lo = np.array(grid.origin, dtype=float)
    return lo, lo + np.array(grid.extents, dtype=float)


def on_wall(point: Sequence[float], grid: Grid) -> bool:
    lo, hi = _box(grid)
    return any(math.isclose(point[a], lo[a], abs_tol=1e-12) or math.isclose(point[a], hi[a], abs_tol=1e-12)
               for a in range(len(lo)))


def is_wall_edge(p: Sequence[float], q: Sequence[float], grid: Grid) -> bool:
    """True when the segment pq lies on one wall of the box."""
    lo, hi = _box(grid)
    for a in range(len(lo)):
        for wall in (lo[a], hi[a]):
            if math.isclose(p[a], wall, abs_tol=1e-12) and math.isclose(q[a], wall, abs_tol=1e-12):
                return True
    return False


def perimeter(geometry: InterfaceGeometry, grid: Grid) -> float:
    """Interface measure inside the domain: transverse area for slabs, clipped edge length for polygons."""
    geometry.validate(grid)
    if geometry.kind == GeometryKind.FLAT_SLAB:
        return math.prod(e for a, e in enumerate(grid.extents) if a != geometry.axis)
    lo, hi = _box(grid)
    # edges lying on a wall are not part of the interface
    return math.fsum(clipped_length(p, q, lo, hi) for p, q in geometry.edges() if not is_wall_edge(p, q, grid))
