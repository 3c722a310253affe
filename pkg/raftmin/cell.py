"""Cell-problem estimator for the surface energy density m_d.

Profiles are quintic B-splines on [-1/2, 1/2] with uniform knots. Coefficients
whose support meets a clamp zone are fixed, so the profile is exactly +1 near
-1/2 and -1 near +1/2 with every derivative zero there. The cell energy is F_v
on a slab of unit transverse period, integrated with a fixed Gauss-Legendre
rule that does not depend on the number of profile intervals.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import optimize, sparse
from scipy.interpolate import BSpline, make_lsq_spline
from scipy.special import roots_legendre

from raftmin.exceptions import ConfigError, NumericalError
from raftmin.models import ProfileInit
from raftmin.potential import Potential
from raftmin.schemas import CellScanRow, CellSpec, TransverseReport
from raftmin.sweep import run_sweep

logger = logging.getLogger(__name__)

DEGREE = 5
QUAD_INTERVALS = 2048
QUAD_NODES = 6


def uniform_knots(dofs: int) -> np.ndarray:
    """Clamped knot vector with ``dofs`` uniform intervals on [-1/2, 1/2]."""
    interior = np.linspace(-0.5, 0.5, dofs + 1)
    return np.concatenate([np.full(DEGREE, -0.5), interior, np.full(DEGREE, 0.5)])


def clamp_intervals(dofs: int, clamp: float) -> int:
    return max(1, math.ceil(clamp * dofs - 1e-9))


def cell_quadrature() -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(QUAD_NODES)
    edges = np.linspace(-0.5, 0.5, QUAD_INTERVALS + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    x = (mid[:, None] + half * nodes[None, :]).ravel()
    w = np.tile(half * weights, QUAD_INTERVALS)
    return x, w


def design_matrices(t: np.ndarray, x: np.ndarray, orders: int = 3) -> List[sparse.csr_matrix]:
    """Sparse maps from coefficients to derivatives 0..orders at the points x.

    The derivative of order p is the degree k-p design matrix on the trimmed
    knots composed with the coefficient difference operators.
    """
    k = DEGREE
    mats = [sparse.csr_matrix(BSpline.design_matrix(x, t, k))]
    nb = len(t) - k - 1
    D = sparse.identity(nb, format="csr")
    tt, kk = t, k
    for _ in range(orders):
        n_cur = len(tt) - kk - 1
        denom = tt[kk + 1:kk + n_cur] - tt[1:n_cur]
        diff = sparse.diags([-np.ones(n_cur - 1), np.ones(n_cur - 1)], [0, 1], shape=(n_cur - 1, n_cur))
        D = sparse.diags(kk / denom) @ diff @ D
        tt, kk = tt[1:-1], kk - 1
        mats.append(sparse.csr_matrix(sparse.csr_matrix(BSpline.design_matrix(x, tt, kk)) @ D))
    return mats


class CellProfile:
    """An admissible cell profile v(y), +1 below -1/2 and -1 above +1/2."""

    def __init__(self, knots: np.ndarray, coefficients: np.ndarray, eps: float, clamp: float):
        self.knots = np.asarray(knots, dtype=float)
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.eps = float(eps)
        self.clamp = float(clamp)
        self.dofs = len(self.knots) - 2 * DEGREE - 1
        self._spline = BSpline(self.knots, self.coefficients, DEGREE, extrapolate=False)

    def __call__(self, y) -> np.ndarray:
        return self.derivative(y, 0)

    def derivative(self, y, order: int = 1) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        spline = self._spline if order == 0 else self._spline.derivative(order)
        inside = (y >= -0.5) & (y <= 0.5)
        outside = np.where(y < 0, 1.0, -1.0) if order == 0 else np.zeros_like(y)
        return np.where(inside, np.nan_to_num(spline(np.clip(y, -0.5, 0.5))), outside)

    def core_halfwidth(self, tol: float = 1e-10, samples: int = 20001) -> float:
        """Largest |y| where the profile departs from its end value."""
        y = np.linspace(-0.5, 0.5, samples)
        dev = np.abs(self(y) - np.where(y < 0, 1.0, -1.0))
        active = np.abs(y[dev > tol])
        return float(active.max()) if active.size else 0.0

    def prolong(self, dofs: int) -> "CellProfile":
        """Least-squares transfer to ``dofs`` intervals; exact when the old knots nest."""
        t_new = uniform_knots(dofs)
        y = np.linspace(-0.5, 0.5, 8 * dofs + 1)
        spline = make_lsq_spline(y, self(y), t_new, k=DEGREE)
        coeffs = np.array(spline.c)
        fixed = clamp_intervals(dofs, self.clamp) + DEGREE
        coeffs[:fixed] = 1.0
        coeffs[-fixed:] = -1.0
        return CellProfile(t_new, coeffs, self.eps, self.clamp)

    def __repr__(self) -> str:
        return f"CellProfile(dofs={self.dofs}, eps={self.eps})"


class CellBasis:
    """Knots, quadrature and derivative matrices shared by every cell scale."""

    def __init__(self, dofs: int, clamp: float):
        self.dofs = dofs
        self.clamp = clamp
        self.knots = uniform_knots(dofs)
        self.size = dofs + DEGREE
        self.fixed = clamp_intervals(dofs, clamp) + DEGREE
        if self.size - 2 * self.fixed < 1:
            raise ConfigError(f"Clamp {clamp} leaves no free coefficients at {dofs} intervals")
        self.free = np.arange(self.fixed, self.size - self.fixed)
        self.base = np.zeros(self.size)
        self.base[:self.fixed] = 1.0
        self.base[-self.fixed:] = -1.0
        self.x, self.w = cell_quadrature()
        self.B = design_matrices(self.knots, self.x)

    def full(self, free_coeffs: np.ndarray) -> np.ndarray:
        c = self.base.copy()
        c[self.free] = free_coeffs
        return c

    def greville(self) -> np.ndarray:
        return np.array([self.knots[i + 1:i + DEGREE + 1].mean() for i in range(self.size)])

    def initial(self, init: ProfileInit) -> np.ndarray:
        """Free coefficients of the default start: a clamped -sin or a linear ramp."""
        half = 0.5 - (self.fixed - DEGREE) / self.dofs
        s = np.clip(self.greville() / half, -1.0, 1.0)
        c = -np.sin(0.5 * np.pi * s) if init == ProfileInit.SINE else -s
        return c[self.free]

    def profile(self, free_coeffs: np.ndarray, eps: float) -> CellProfile:
        return CellProfile(self.knots, self.full(free_coeffs), eps, self.clamp)


def cell_energy_and_gradient(basis: CellBasis, free_coeffs: np.ndarray, pot: Potential, q: float,
                             eps: float) -> Tuple[float, np.ndarray]:
    """Cell energy of the profile and its gradient in the free coefficients."""
    c = basis.full(free_coeffs)
    B0, B1, B2, B3 = basis.B
    w = basis.w
    v, v1, v2, v3 = B0 @ c, B1 @ c, B2 @ c, B3 @ c
    u = v - eps**2 * v2
    a2, a3 = (1.0 - 2.0 * q) * eps**3, (1.0 - q) * eps**5
    density = pot.W(u) / eps - eps * q * v1**2 + a2 * v2**2 + a3 * v3**2
    energy = float(np.dot(w, density))
    gu = w * pot.W1(u) / eps
    grad = (B0.T @ gu - eps**2 * (B2.T @ gu)
            + B1.T @ (w * (-2.0 * eps * q * v1))
            + B2.T @ (w * (2.0 * a2 * v2))
            + B3.T @ (w * (2.0 * a3 * v3)))
    return energy, np.asarray(grad)[basis.free]


def profile_energy(profile: CellProfile, pot: Potential, q: float, eps: Optional[float] = None) -> float:
    """Cell energy of a given admissible profile at ``eps`` (default: its own scale)."""
    basis = CellBasis(profile.dofs, profile.clamp)
    free = profile.coefficients[basis.free]
    energy, _ = cell_energy_and_gradient(basis, free, pot, q, profile.eps if eps is None else eps)
    return energy


def ramp_profile(dofs: int = 64, clamp: float = 0.05, eps: float = 0.1) -> CellProfile:
    basis = CellBasis(dofs, clamp)
    return basis.profile(basis.initial(ProfileInit.RAMP), eps)


class CellResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    md: float
    eps_argmin: float
    profile: CellProfile
    q: float
    profile_dofs: int
    scan: List[CellScanRow]
    profiles: Dict[float, CellProfile]


def _optimize(basis: CellBasis, start: np.ndarray, pot: Potential, q: float, eps: float,
              max_iter: int) -> Tuple[np.ndarray, float, int, bool]:
    fun = lambda c: cell_energy_and_gradient(basis, c, pot, q, eps)
    e0, _ = fun(start)
    res = optimize.minimize(fun, start, jac=True, method="L-BFGS-B",
                            options={"maxiter": max_iter, "ftol": 1e-14, "gtol": 1e-10})
    if not np.isfinite(res.fun) or res.fun > e0:
        return start, e0, int(res.nit), False
    return np.asarray(res.x), float(res.fun), int(res.nit), bool(res.success)


def estimate_md(pot: Potential, q: float, eps_grid: Sequence[float] = (0.02, 0.05, 0.1, 0.2, 0.5, 1.0),
                profile_dofs: int = 64, clamp: float = 0.05, init: ProfileInit = ProfileInit.SINE,
                max_iter: int = 400, warm_start: Optional[CellResult] = None,
                max_workers: Optional[int] = None) -> CellResult:
    """Minimize the cell energy over clamped profiles and scale eps in (0, 1].

    Every eps is optimized independently with L-BFGS-B. A warm start prolongs
    the previous optimum at the same eps and keeps whichever start ends lower,
    so refining never raises the estimate.
    """
    eps_grid = sorted(set(float(e) for e in eps_grid))
    if not eps_grid or any(not 0 < e <= 1 for e in eps_grid):
        raise ConfigError(f"Cell scales must lie in (0, 1], got {eps_grid}")
    basis = CellBasis(profile_dofs, clamp)
    start = basis.initial(init)

    def solve(eps: float) -> Tuple[np.ndarray, float, int, bool]:
        best = _optimize(basis, start, pot, q, eps, max_iter)
        previous = warm_start.profiles.get(eps) if warm_start is not None else None
        if previous is not None:
            warm = previous.prolong(profile_dofs).coefficients[basis.free]
            candidate = _optimize(basis, warm, pot, q, eps, max_iter)
            if candidate[1] <= best[1]:
                best = candidate
        logger.info(f"Cell eps={eps}: energy {best[1]:.10g} after {best[2]} iterations")
        return best

    results = run_sweep(solve, eps_grid, max_workers, label="cell scan")
    scan = [CellScanRow(eps=e, energy=r[1], iterations=r[2], converged=r[3]) for e, r in zip(eps_grid, results)]
    finite = [i for i, r in enumerate(results) if math.isfinite(r[1])]
    if not finite:
        raise NumericalError(f"No cell profile with finite energy at q={q}")
    best = min(finite, key=lambda i: results[i][1])
    profiles = {e: basis.profile(r[0], e) for e, r in zip(eps_grid, results)}
    eps_best = eps_grid[best]
    if len(eps_grid) > 1 and best in (0, len(eps_grid) - 1):
        logger.warning(f"Cell minimum sits on the scan boundary eps={eps_best}; the infimum may lie outside the grid")
    return CellResult(md=results[best][1], eps_argmin=eps_best, profile=profiles[eps_best], q=q,
                      profile_dofs=profile_dofs, scan=scan, profiles=profiles)


def estimate_from_spec(pot: Potential, q: float, spec: CellSpec, warm_start: Optional[CellResult] = None) -> CellResult:
    return estimate_md(pot, q, spec.eps_grid, spec.profile_dofs, spec.clamp, spec.init, spec.max_iter, warm_start)


def transverse_probe(pot: Potential, q: float, profile: CellProfile, amplitudes: Sequence[float],
                     n_transverse: int = 16) -> TransverseReport:
    """Energy of w(y) + a eta(y) cos(2 pi x) on the unit cell for each amplitude a.

    eta is the sum of the free B-splines, so it vanishes with all derivatives on
    the clamp zones and every modulated profile stays admissible.
    """
    basis = CellBasis(profile.dofs, profile.clamp)
    eps = profile.eps
    B0, B1, B2, B3 = basis.B
    c = profile.coefficients
    eta_c = np.zeros(basis.size)
    eta_c[basis.free] = 1.0
    w0, w1, w2, w3 = (B @ c for B in basis.B)
    e0, e1, e2, e3 = (B @ eta_c for B in basis.B)
    k = 2.0 * np.pi
    x = np.arange(n_transverse) / n_transverse
    cos, sin = np.cos(k * x)[None, :], np.sin(k * x)[None, :]
    weights = basis.w[:, None] / n_transverse

    def energy(a: float) -> float:
        v = w0[:, None] + a * e0[:, None] * cos
        vx = -a * k * e0[:, None] * sin
        vy = w1[:, None] + a * e1[:, None] * cos
        lap = w2[:, None] + a * (e2 - k**2 * e0)[:, None] * cos
        glx = -a * k * (e2 - k**2 * e0)[:, None] * sin
        gly = w3[:, None] + a * (e3 - k**2 * e1)[:, None] * cos
        u = v - eps**2 * lap
        density = (pot.W(u) / eps - eps * q * (vx**2 + vy**2) + (1.0 - 2.0 * q) * eps**3 * lap**2
                   + (1.0 - q) * eps**5 * (glx**2 + gly**2))
        return float(np.sum(weights * density))

    base = energy(0.0)
    rows = [(float(a), energy(a)) for a in amplitudes]
    improves = any(e < base - 1e-12 * (1.0 + abs(base)) for _, e in rows)
    if improves:
        logger.info(f"Transverse modulation lowers the cell energy below {base:.10g}")
    return TransverseReport(base_energy=base, rows=rows, improves=improves)
