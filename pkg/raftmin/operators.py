"""Spectral differential operators and the Helmholtz resolvent."""
import logging
import math
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy import fft

from raftmin.exceptions import ConfigError
from raftmin.grid import Grid, ScalarField, backward, forward, integrate_values
from raftmin.models import Boundary

logger = logging.getLogger(__name__)


def _axis_derivative(grid: Grid, values: np.ndarray, axis: int, order: int) -> np.ndarray:
    if order == 0:
        return values
    n = grid.n[axis]
    if grid.boundary == Boundary.NEUMANN:
        kappa = np.pi * np.arange(n) / grid.extents[axis]
        shape = [1] * grid.d
        shape[axis] = -1
        X = fft.dct(values, type=2, norm="ortho", axis=axis)
        if order % 2 == 0:
            sign = (-1) ** (order // 2)
            return fft.idct(X * (sign * kappa**order).reshape(shape), type=2, norm="ortho", axis=axis)
        # cosine index k maps to sine index k-1; the last sine slot stays empty
        sign = -1 if order % 4 == 1 else 1
        X = np.moveaxis(X * (sign * kappa**order).reshape(shape), axis, -1)
        S = np.zeros_like(X)
        S[..., :-1] = X[..., 1:]
        return fft.idst(np.moveaxis(S, -1, axis), type=2, norm="ortho", axis=axis)
    kappa = 2.0 * np.pi * np.arange(n // 2 + 1) / grid.extents[axis]
    symbol = (1j * kappa) ** order
    if order % 2:
        symbol[-1] = 0.0
    shape = [1] * grid.d
    shape[axis] = -1
    F = fft.rfft(values, axis=axis) * symbol.reshape(shape)
    return fft.irfft(F, n=n, axis=axis)


def derivative_values(grid: Grid, values: np.ndarray, orders: Sequence[int]) -> np.ndarray:
    """Mixed partial derivative with per-axis orders, one transform per axis."""
    out = np.asarray(values, dtype=float)
    for axis, order in enumerate(orders):
        out = _axis_derivative(grid, out, axis, order)
    return out


def _unit(d: int, axis: int, order: int = 1) -> Tuple[int, ...]:
    return tuple(order if a == axis else 0 for a in range(d))


def derivative(field: ScalarField, orders: Sequence[int]) -> ScalarField:
    if len(orders) != field.grid.d:
        raise ConfigError(f"Need {field.grid.d} derivative orders, got {len(orders)}")
    return ScalarField(field.grid, derivative_values(field.grid, field.values, orders))


def laplacian_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    return backward(grid, -grid.eigenvalues * forward(grid, values))


def gradient_values(grid: Grid, values: np.ndarray) -> Tuple[np.ndarray, ...]:
    return tuple(derivative_values(grid, values, _unit(grid.d, a)) for a in range(grid.d))


def gradient_sq_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    return sum(g**2 for g in gradient_values(grid, values))


def hessian_sq_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    total = np.zeros(grid.shape)
    for i in range(grid.d):
        total = total + derivative_values(grid, values, _unit(grid.d, i, 2)) ** 2
        for j in range(i + 1, grid.d):
            orders = tuple(1 if a in (i, j) else 0 for a in range(grid.d))
            total = total + 2.0 * derivative_values(grid, values, orders) ** 2
    return total


def laplacian(field: ScalarField) -> ScalarField:
    return ScalarField(field.grid, laplacian_values(field.grid, field.values))


def gradient_sq(field: ScalarField) -> ScalarField:
    """Pointwise |grad v|^2."""
    return ScalarField(field.grid, gradient_sq_values(field.grid, field.values))


def grad_laplacian_sq(field: ScalarField) -> ScalarField:
    """Pointwise |grad Laplace v|^2."""
    lap = laplacian_values(field.grid, field.values)
    return ScalarField(field.grid, gradient_sq_values(field.grid, lap))


def hessian_sq(field: ScalarField) -> ScalarField:
    """Pointwise |D^2 v|^2 (Frobenius)."""
    return ScalarField(field.grid, hessian_sq_values(field.grid, field.values))


def resolvent_multiplier(grid: Grid, eps: float) -> np.ndarray:
    return 1.0 / (1.0 + eps**2 * grid.eigenvalues)


def helmholtz_inverse_values(grid: Grid, values: np.ndarray, eps: float) -> np.ndarray:
    return backward(grid, forward(grid, values) * resolvent_multiplier(grid, eps))


def helmholtz_inverse(u: ScalarField, eps: float) -> ScalarField:
    """v = (1 - eps^2 Laplace)^{-1} u, applied diagonally in the eigenbasis."""
    if not eps > 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    return ScalarField(u.grid, helmholtz_inverse_values(u.grid, u.values, eps))


def helmholtz_residual(u: ScalarField, v: ScalarField, eps: float) -> float:
    """Relative L2 residual of -eps^2 Laplace v + v = u."""
    grid = u.grid
    r = v.values - eps**2 * laplacian_values(grid, v.values) - u.values
    denom = math.sqrt(integrate_values(grid, u.values**2))
    return math.sqrt(integrate_values(grid, r**2)) / (denom if denom > 0 else 1.0)


def elliptic_probe(fields: Iterable[ScalarField]) -> float:
    """Smallest C with ||D^2 v||^2 <= 3 ||Laplace v||^2 + C ||v||^2 on the sample."""
    c_hat = 0.0
    for v in fields:
        grid = v.grid
        norm_sq = integrate_values(grid, v.values**2)
        if norm_sq == 0:
            continue
        hess = integrate_values(grid, hessian_sq_values(grid, v.values))
        lap = integrate_values(grid, laplacian_values(grid, v.values) ** 2)
        c_hat = max(c_hat, (hess - 3.0 * lap) / norm_sq)
    logger.info(f"Elliptic probe constant estimate: {c_hat:.3e}")
    return c_hat
