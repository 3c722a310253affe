"""Gradient-flow minimization of the nonlocal raft energy F_star."""
import logging
import math
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from raftmin.energy import F_star, variational_derivative_values
from raftmin.exceptions import ConfigError, DivergenceError, StepUnderflowError
from raftmin.grid import Grid, ScalarField, backward, dominant_wavenumber, forward, integrate_values
from raftmin.models import FlowScheme, FlowStatus
from raftmin.potential import Potential
from raftmin.schemas import EnergyParams, FlowConfig, TrajectoryRow

logger = logging.getLogger(__name__)

# relative slack when comparing successive energies
ENERGY_SLACK = 1e-12
# step cap of the split scheme unless FlowConfig.max_dt is set
SEMI_IMPLICIT_MAX_DT = 1.0


class FlowResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    field: ScalarField
    status: FlowStatus
    steps: int
    energy: float
    dt: float
    trajectory: List[TrajectoryRow]


def initial_field(grid: Grid, cfg: FlowConfig, amplitude: float = 0.1) -> ScalarField:
    """Uniform noise in [-amplitude, amplitude] around the configured mean."""
    rng = np.random.default_rng(cfg.seed)
    noise = rng.uniform(-amplitude, amplitude, size=grid.shape)
    noise -= noise.mean()
    mean = cfg.mass_constraint if cfg.mass_constraint is not None else 0.0
    return ScalarField(grid, noise + mean)


def default_floor(grid: Grid, eps: float) -> float:
    return -1e3 * grid.volume / eps


def _energy(grid: Grid, values: np.ndarray, p: EnergyParams, pot: Potential) -> float:
    if not np.all(np.isfinite(values)):
        return math.inf
    total = F_star(ScalarField(grid, values), p, pot).total
    return total if math.isfinite(total) else math.inf


def _gradient(grid: Grid, values: np.ndarray, p: EnergyParams, pot: Potential, fix_mean: bool) -> np.ndarray:
    g = variational_derivative_values(grid, values, p, pot)
    if fix_mean:
        g = g - g.mean()
    return g


def semi_implicit_values(grid: Grid, values: np.ndarray, dt: float, p: EnergyParams, pot: Potential,
                         stabilization: float = 4.0, fix_mean: bool = False) -> np.ndarray:
    eps, q = p.eps, p.q
    t = eps**2 * grid.eigenvalues
    implicit = (2.0 * (1.0 - q) * t + 2.0 / (1.0 + t)) / eps
    coeffs = forward(grid, values)
    explicit = forward(grid, pot.W1(values) / eps) - (2.0 + stabilization) / eps * coeffs
    new = (coeffs - dt * explicit) / (1.0 + dt * (implicit + stabilization / eps))
    if fix_mean:
        new[(0,) * grid.d] = coeffs[(0,) * grid.d]
    return backward(grid, new)


def semi_implicit_step(u: ScalarField, dt: float, p: EnergyParams, pot: Potential, stabilization: float = 4.0,
                       fix_mean: bool = False) -> ScalarField:
    """One convex-concave split step.

    The linear operator 2(1-q) eps^2 lambda^2 + 2/(1+eps^2 lambda^2) and a
    stabilizing S/eps are implicit; W'(u) and the -2u term are explicit. Fixed
    points are exactly the critical points of F_star. For large dt the step
    tends to a gradient step preconditioned by the implicit operator, which
    contracts near the wells while W'' < 2 + 2S plus its symbol.
    """
    return ScalarField(u.grid, semi_implicit_values(u.grid, u.values, dt, p, pot, stabilization, fix_mean))


def l2_descent_step(u: ScalarField, dt: float, p: EnergyParams, pot: Potential, fix_mean: bool = False) -> ScalarField:
    g = _gradient(u.grid, u.values, p, pot, fix_mean)
    return ScalarField(u.grid, u.values - dt * g)


def step_cap(cfg: FlowConfig) -> float:
    if cfg.max_dt is not None:
        return cfg.max_dt
    if cfg.scheme == FlowScheme.SEMI_IMPLICIT_SPECTRAL:
        return max(cfg.dt, SEMI_IMPLICIT_MAX_DT)
    return cfg.dt


def _stalled(trajectory: List[TrajectoryRow], cfg: FlowConfig) -> bool:
    """Energy drop over the last stall_window steps below stall_tol, gradient not growing."""
    if cfg.stall_tol is None or len(trajectory) <= cfg.stall_window:
        return False
    old, new = trajectory[-1 - cfg.stall_window], trajectory[-1]
    drop = old.energy - new.energy
    return drop <= cfg.stall_tol * max(abs(new.energy), 1.0) and new.grad_norm <= old.grad_norm


def _row(grid: Grid, step: int, values: np.ndarray, energy: float, g: np.ndarray) -> TrajectoryRow:
    return TrajectoryRow(
        step=step,
        energy=energy,
        grad_norm=math.sqrt(integrate_values(grid, g**2)),
        mean=float(np.mean(values)),
        dominant_wavenumber=dominant_wavenumber(ScalarField(grid, values)),
    )


def descend(u0: ScalarField, p: EnergyParams, pot: Potential, cfg: FlowConfig,
            raise_on_failure: bool = False) -> FlowResult:
    """Minimize F_star from u0 with step-size control.

    Every accepted step does not raise the energy beyond round-off. The step
    grows by 10% per accepted step up to ``step_cap(cfg)`` and halves on
    rejection. With ``stall_tol`` set, a run whose energy has stopped
    dropping over ``stall_window`` steps ends as converged. With a
    mass constraint the mean stays fixed. Divergence below the energy floor
    and step underflow end the run with the matching status, or raise when
    ``raise_on_failure`` is set.
    """
    grid = u0.grid
    fix_mean = cfg.mass_constraint is not None
    if fix_mean and abs(u0.mean() - cfg.mass_constraint) > 1e-12:
        raise ConfigError(f"Initial mean {u0.mean():.15g} differs from the mass constraint {cfg.mass_constraint}")
    floor = cfg.energy_floor if cfg.energy_floor is not None else default_floor(grid, p.eps)

    values = np.array(u0.values)
    energy = _energy(grid, values, p, pot)
    g = _gradient(grid, values, p, pot, fix_mean)
    trajectory = [_row(grid, 0, values, energy, g)]
    dt = cfg.dt
    cap = step_cap(cfg)
    status: Optional[FlowStatus] = None
    step = 0

    logger.info(f"Starting {cfg.scheme.value} flow: eps={p.eps}, q={p.q}, dt={dt}, energy={energy:.10g}")
    while step < cfg.max_steps:
        if trajectory[-1].grad_norm <= cfg.tolerance:
            status = FlowStatus.CONVERGED
            break
        while True:
            if cfg.scheme == FlowScheme.SEMI_IMPLICIT_SPECTRAL:
                trial = semi_implicit_values(grid, values, dt, p, pot, cfg.stabilization, fix_mean)
            else:
                trial = values - dt * g
            trial_energy = _energy(grid, trial, p, pot)
            if trial_energy <= energy + ENERGY_SLACK * (1.0 + abs(energy)):
                break
            dt *= 0.5
            if dt < cfg.min_dt:
                status = FlowStatus.STEP_UNDERFLOW
                break
        if status is not None:
            break
        step += 1
        values, energy = trial, trial_energy
        g = _gradient(grid, values, p, pot, fix_mean)
        trajectory.append(_row(grid, step, values, energy, g))
        if energy < floor:
            status = FlowStatus.DIVERGED
            break
        if _stalled(trajectory, cfg):
            logger.info(f"Energy stalled at step {step}: grad_norm={trajectory[-1].grad_norm:.3e}")
            status = FlowStatus.CONVERGED
            break
        dt = min(1.1 * dt, cap)

    if status is None:
        status = FlowStatus.CONVERGED if trajectory[-1].grad_norm <= cfg.tolerance else FlowStatus.MAX_STEPS
    logger.info(f"Flow finished with {status.value} after {step} steps, energy={energy:.10g}")

    if raise_on_failure:
        if status == FlowStatus.DIVERGED:
            raise DivergenceError(p.eps, p.q, energy, floor)
        if status == FlowStatus.STEP_UNDERFLOW:
            raise StepUnderflowError(dt, cfg.min_dt, step)
    if status in (FlowStatus.DIVERGED, FlowStatus.STEP_UNDERFLOW):
        logger.warning(f"Flow ended with {status.value} at eps={p.eps}, q={p.q}")

    return FlowResult(field=ScalarField(grid, values), status=status, steps=step, energy=energy, dt=dt,
                      trajectory=trajectory)
