"""Rectangular grids with a spectral basis diagonalizing -Laplace.

Neumann grids use cell-centred points and the orthonormal cosine basis; the
transform is an orthonormal DCT-II scaled by the square root of the cell
volume, so discrete orthonormality and Parseval hold exactly.

Periodic grids use the points ``a + j h`` and the orthonormal real Fourier
basis, packed per axis as ``[1, cos_1, sin_1, ..., cos_{n/2}]``.
"""
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import fft

from raftmin.exceptions import GridError, NumericalError
from raftmin.models import Boundary
from raftmin.schemas import GridSpec

logger = logging.getLogger(__name__)

Region = Sequence[Tuple[float, float]]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class Grid:
    """Immutable rectangular grid with its eigenvalue table."""

    def __init__(self, extents: Sequence[float], n: Sequence[int], boundary: Boundary,
                 origin: Optional[Sequence[float]] = None):
        self.d = len(extents)
        self.extents = tuple(float(e) for e in extents)
        self.n = tuple(int(k) for k in n)
        self.boundary = Boundary(boundary)
        if origin is None:
            origin = [-e / 2.0 for e in self.extents]
        self.origin = tuple(float(a) for a in origin)
        self.spacing = tuple(e / k for e, k in zip(self.extents, self.n))
        self.cell_volume = math.prod(self.spacing)
        self.volume = math.prod(self.extents)
        self.shape = self.n

        self.axis_wavenumbers = tuple(_readonly(self._axis_wavenumbers(a)) for a in range(self.d))
        lam2 = np.zeros(self.shape)
        for a, k in enumerate(self.axis_wavenumbers):
            lam2 = lam2 + _along(k**2, a, self.d)
        self.eigenvalues = _readonly(lam2)

    def _axis_wavenumbers(self, axis: int) -> np.ndarray:
        n, ell = self.n[axis], self.extents[axis]
        idx = np.arange(n)
        if self.boundary == Boundary.NEUMANN:
            return np.pi * idx / ell
        return 2.0 * np.pi * ((idx + 1) // 2) / ell

    def coords(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        j = np.arange(self.n[axis])
        if self.boundary == Boundary.NEUMANN:
            return self.origin[axis] + (j + 0.5) * h
        return self.origin[axis] + j * h

    def mesh(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[self.coords(a) for a in range(self.d)], indexing="ij"))

    def region_mask(self, region: Region) -> np.ndarray:
        if len(region) != self.d:
            raise GridError(f"Region has {len(region)} axes but grid has {self.d}")
        mask = np.ones(self.shape, dtype=bool)
        for a, (lo, hi) in enumerate(region):
            x = self.coords(a)
            mask &= _along((x >= lo) & (x <= hi), a, self.d)
        return mask

    def spec(self) -> GridSpec:
        return GridSpec(dims=self.d, extents=list(self.extents), n=list(self.n),
                        boundary=self.boundary, origin=list(self.origin))

    def _key(self):
        return (self.extents, self.n, self.boundary, self.origin)

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        return f"Grid(d={self.d}, extents={self.extents}, n={self.n}, boundary={self.boundary.value})"


def _along(vec: np.ndarray, axis: int, d: int) -> np.ndarray:
    shape = [1] * d
    shape[axis] = -1
    return np.reshape(vec, shape)


def make_grid(d: int, extents: Sequence[float], n: Sequence[int], boundary: Boundary = Boundary.NEUMANN,
              origin: Optional[Sequence[float]] = None) -> Grid:
    """Build a grid; n must be even and at least 4 on every axis."""
    if d not in (1, 2, 3):
        raise GridError(f"Dimension must be 1, 2 or 3, got {d}")
    if len(extents) != d or len(n) != d:
        raise GridError(f"Expected {d} extents and point counts, got {len(extents)} and {len(n)}")
    for e in extents:
        if not (math.isfinite(e) and e > 0):
            raise GridError(f"Extents must be positive, got {list(extents)}")
    for k in n:
        if int(k) != k or k < 4 or k % 2:
            raise GridError(f"Point counts must be even integers >= 4, got {list(n)}")
    if origin is not None and len(origin) != d:
        raise GridError(f"Origin must have {d} entries")
    try:
        boundary = Boundary(boundary)
    except ValueError:
        raise GridError(f"Unknown boundary kind {boundary!r}")
    return Grid(extents, n, boundary, origin)


def grid_from_spec(spec: GridSpec) -> Grid:
    return make_grid(spec.dims, spec.extents, spec.n, spec.boundary, spec.origin)


class ScalarField:
    """Real values on the grid points, shape ``grid.shape``."""

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float)
        if arr.size != math.prod(grid.shape):
            raise GridError(f"Field has {arr.size} values, grid {grid.shape} needs {math.prod(grid.shape)}")
        arr = arr.reshape(grid.shape)
        if not np.all(np.isfinite(arr)):
            raise NumericalError("Field values must be finite")
        self.grid = grid
        self.values = _readonly(arr)

    def _other_values(self, other):
        if isinstance(other, ScalarField):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other_values(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other_values(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other_values(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other_values(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def __repr__(self) -> str:
        return f"ScalarField({self.grid!r})"


class SpectralField:
    """Coefficients against the grid's orthonormal basis, shape ``grid.shape``."""

    def __init__(self, grid: Grid, coefficients):
        arr = np.array(coefficients, dtype=float).reshape(grid.shape)
        self.grid = grid
        self.coefficients = _readonly(arr)


def check_same_grid(*fields) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridError(f"Grid mismatch: {grid!r} vs {f.grid!r}")
    return grid


def _pack_rfft(arr: np.ndarray, axis: int) -> np.ndarray:
    n = arr.shape[axis]
    F = np.moveaxis(fft.rfft(arr, axis=axis), axis, -1)
    out = np.empty(F.shape[:-1] + (n,))
    out[..., 0] = F[..., 0].real
    out[..., 1:n - 1:2] = math.sqrt(2.0) * F[..., 1:n // 2].real
    out[..., 2:n - 1:2] = -math.sqrt(2.0) * F[..., 1:n // 2].imag
    out[..., n - 1] = F[..., n // 2].real
    return np.moveaxis(out / math.sqrt(n), -1, axis)


def _unpack_irfft(coef: np.ndarray, axis: int) -> np.ndarray:
    n = coef.shape[axis]
    c = np.moveaxis(coef, axis, -1) * math.sqrt(n)
    F = np.empty(c.shape[:-1] + (n // 2 + 1,), dtype=complex)
    F[..., 0] = c[..., 0]
    F[..., 1:n // 2] = (c[..., 1:n - 1:2] - 1j * c[..., 2:n - 1:2]) / math.sqrt(2.0)
    F[..., n // 2] = c[..., n - 1]
    return np.moveaxis(fft.irfft(F, n=n, axis=-1), -1, axis)


def forward(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Basis coefficients of raw grid values."""
    scale = math.sqrt(grid.cell_volume)
    if grid.boundary == Boundary.NEUMANN:
        return fft.dctn(values, type=2, norm="ortho") * scale
    out = np.asarray(values, dtype=float)
    for axis in range(grid.d):
        out = _pack_rfft(out, axis)
    return out * scale


def backward(grid: Grid, coefficients: np.ndarray) -> np.ndarray:
    """Grid values of a coefficient array."""
    scale = 1.0 / math.sqrt(grid.cell_volume)
    if grid.boundary == Boundary.NEUMANN:
        return fft.idctn(coefficients, type=2, norm="ortho") * scale
    out = np.asarray(coefficients, dtype=float)
    for axis in range(grid.d):
        out = _unpack_irfft(out, axis)
    return out * scale


def transform(field: ScalarField) -> SpectralField:
    return SpectralField(field.grid, forward(field.grid, field.values))


def inverse_transform(spectral: SpectralField) -> ScalarField:
    return ScalarField(spectral.grid, backward(spectral.grid, spectral.coefficients))


def integrate(field: ScalarField, region: Optional[Region] = None) -> float:
    """Cell-volume quadrature, optionally restricted to a sub-box."""
    return integrate_values(field.grid, field.values, region)


def integrate_values(grid: Grid, values: np.ndarray, region: Optional[Region] = None) -> float:
    if region is None:
        return float(grid.cell_volume * np.sum(values))
    return float(grid.cell_volume * np.sum(values[grid.region_mask(region)]))


def inner(f: ScalarField, g: ScalarField, region: Optional[Region] = None) -> float:
    grid = check_same_grid(f, g)
    return integrate_values(grid, f.values * g.values, region)


def cosine_mode_index(grid: Grid, n: int) -> Tuple[int, ...]:
    """Multi-index of cos(2 pi n x_1) on the grid, constant in the other axes.

    Requires the first axis to have extent 2 on a Neumann grid (index 4n) or
    a periodic grid with 2n below the Nyquist frequency (index 4n - 1).
    """
    ell, a = grid.extents[0], grid.origin[0]
    # frequency 2 pi n must be on the axis ladder and the phase n*a an integer
    if grid.boundary == Boundary.NEUMANN:
        k = 2.0 * n * ell
        idx = int(round(k))
    else:
        k = n * ell
        idx = 0 if n == 0 else 2 * int(round(k)) - 1
    on_ladder = abs(k - round(k)) < 1e-9 and abs(n * a - round(n * a)) < 1e-9
    if not on_ladder or idx >= grid.n[0]:
        raise GridError(f"cos(2 pi {n} x) is not a basis function of {grid!r}")
    return (idx,) + (0,) * (grid.d - 1)


def basis_function(grid: Grid, index: Sequence[int]) -> ScalarField:
    coeffs = np.zeros(grid.shape)
    coeffs[tuple(index)] = 1.0
    return ScalarField(grid, backward(grid, coeffs))


def dominant_wavenumber(field: ScalarField) -> float:
    """Wavenumber of the largest non-constant coefficient."""
    coeffs = np.abs(forward(field.grid, field.values)).ravel()
    coeffs[0] = -1.0
    return float(math.sqrt(field.grid.eigenvalues.ravel()[int(np.argmax(coeffs))]))


def band_mask(grid: Grid, band: int) -> np.ndarray:
    """Indices whose per-axis frequency is at most ``band``."""
    mask = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.d):
        idx = np.arange(grid.n[axis])
        freq = idx if grid.boundary == Boundary.NEUMANN else (idx + 1) // 2
        mask &= _along(freq <= band, axis, grid.d)
    return mask
