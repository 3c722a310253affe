"""Double-well potentials and their structural constants.

The default potential is (1 - s^2)^2 for |s| <= s0, continued beyond s0 by
the C^2-matched quadratic c2 (|s| - m)^2 + c0 so that W'' stays bounded.
"""
import logging
import math
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate

from raftmin.exceptions import ConfigError
from raftmin.models import PotentialKind
from raftmin.schemas import HypothesesReport, PotentialConstants, PotentialSpec, WellReport

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]

# points in the dense constant scan
SCAN_POINTS = 200_001


def quadratic_extension(s0: float) -> Tuple[float, float, float]:
    """Coefficients (c2, m, c0) of the C^2 continuation of (1 - s^2)^2 past s0."""
    c2 = 6.0 * s0**2 - 2.0
    m = s0 - s0 * (s0**2 - 1.0) / (3.0 * s0**2 - 1.0)
    c0 = (s0**2 - 1.0) ** 2 - c2 * (s0 - m) ** 2
    return c2, m, c0


def physical_f(s, a2: float, a4: float):
    """Bulk free energy (a2/2) s^2 + (a4/4) s^4."""
    s = np.asarray(s, dtype=float)
    return 0.5 * a2 * s**2 + 0.25 * a4 * s**4


class Potential:
    """A double-well potential W with first and second derivatives."""

    def __init__(self, kind: PotentialKind, w: ArrayFn, w1: ArrayFn, w2: ArrayFn,
                 wells: Tuple[float, float] = (-1.0, 1.0), s0: Optional[float] = None,
                 name: Optional[str] = None):
        self.kind = PotentialKind(kind)
        self._w, self._w1, self._w2 = w, w1, w2
        self.wells = wells
        self.s0 = s0
        self.name = name or self.kind.value

    def W(self, s):
        return self._w(np.asarray(s, dtype=float))

    def W1(self, s):
        return self._w1(np.asarray(s, dtype=float))

    def W2(self, s):
        return self._w2(np.asarray(s, dtype=float))

    def scan_radius(self) -> float:
        base = self.s0 if self.s0 is not None else max(2.0, 2.0 * max(abs(x) for x in self.wells))
        return 10.0 * base

    def __repr__(self) -> str:
        return f"Potential({self.name})"


def quartic_truncated(s0: float = 2.0) -> Potential:
    if s0 <= 1.0:
        raise ConfigError(f"Crossover s0 must exceed the well at 1, got {s0}")
    c2, m, c0 = quadratic_extension(s0)

    def w(s):
        a = np.abs(s)
        return np.where(a <= s0, (1.0 - s**2) ** 2, c2 * (a - m) ** 2 + c0)

    def w1(s):
        a = np.abs(s)
        return np.where(a <= s0, -4.0 * s * (1.0 - s**2), 2.0 * c2 * (a - m) * np.sign(s))

    def w2(s):
        return np.where(np.abs(s) <= s0, 12.0 * s**2 - 4.0, 2.0 * c2)

    return Potential(PotentialKind.QUARTIC_TRUNCATED, w, w1, w2, s0=s0, name=f"quartic_truncated(s0={s0})")


def quartic() -> Potential:
    return Potential(
        PotentialKind.QUARTIC,
        lambda s: (1.0 - s**2) ** 2,
        lambda s: -4.0 * s * (1.0 - s**2),
        lambda s: 12.0 * s**2 - 4.0,
        s0=2.0,
    )


def custom(w: ArrayFn, w1: ArrayFn, w2: ArrayFn, name: str = "custom",
           wells: Tuple[float, float] = (-1.0, 1.0)) -> Potential:
    return Potential(PotentialKind.CUSTOM, w, w1, w2, wells=wells, name=name)


def zero_potential() -> Potential:
    """W = 0; turns every functional into its quadratic part."""
    zeros = lambda s: np.zeros_like(s)
    return custom(zeros, zeros, zeros, name="zero")


def to_W(a2: float, a4: float, kappa: float, coupling: float, normalize: bool = True) -> Tuple[Potential, WellReport]:
    """Rescale the physical f into W = (2 kappa / Lambda^2) f.

    With ``normalize`` the minimum value of f is subtracted so that W vanishes
    at the wells; without it W is exactly the rescaled f with f(0) = 0.
    """
    if a4 <= 0:
        raise ConfigError(f"a4 must be positive, got {a4}")
    scale = 2.0 * kappa / coupling**2
    double_well = a2 < 0
    if double_well:
        well = math.sqrt(-a2 / a4)
        f_min = float(physical_f(well, a2, a4))
    else:
        well = 0.0
        f_min = 0.0
        logger.warning(f"a2={a2} >= 0: physical f has a single well at 0, not a double well")
    unit = double_well and math.isclose(well, 1.0, rel_tol=1e-12)
    if double_well and not unit:
        logger.warning(f"Physical wells sit at +-{well:.6g}, not +-1; set a2 = -a4 to normalize")
    offset = f_min if normalize else 0.0

    def w(s):
        return scale * (physical_f(s, a2, a4) - offset)

    def w1(s):
        return scale * (a2 * s + a4 * s**3)

    def w2(s):
        return scale * (a2 + 3.0 * a4 * s**2)

    pot = Potential(PotentialKind.PHYSICAL_QUARTIC, w, w1, w2, wells=(-well, well),
                    name=f"physical_quartic(normalize={normalize})")
    return pot, WellReport(wells=(-well, well), unit_wells=unit, double_well=double_well, scale=scale)


def potential_from_spec(spec: PotentialSpec) -> Potential:
    if spec.kind == PotentialKind.QUARTIC_TRUNCATED:
        return quartic_truncated(spec.s0)
    if spec.kind == PotentialKind.QUARTIC:
        return quartic()
    if spec.kind == PotentialKind.PHYSICAL_QUARTIC:
        pot, _ = to_W(spec.a2, spec.a4, spec.kappa, spec.coupling, spec.normalize)
        return pot
    raise ConfigError(f"Potential kind {spec.kind.value} cannot be built from a spec")


def _scan(pot: Potential) -> np.ndarray:
    r = pot.scan_radius()
    return np.linspace(-r, r, SCAN_POINTS)


def _well_distance(pot: Potential, s: np.ndarray) -> np.ndarray:
    lo, hi = pot.wells
    return np.where(s >= 0, s - hi, s - lo)


def estimate_constants(pot: Potential) -> PotentialConstants:
    """Empirical c_w, C_w and K_w on a dense scan plus analytic tails."""
    s = _scan(pot)
    r = s[-1]
    w, w1, w2 = pot.W(s), pot.W1(s), pot.W2(s)
    dist = _well_distance(pot, s)
    near = np.abs(dist) < 1e-6
    # well limits: W/(s-w)^2 -> W''/2 and |W'|/sqrt(W) -> sqrt(2 W'')
    well_w2 = np.where(s >= 0, pot.W2(pot.wells[1]), pot.W2(pot.wells[0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        coerc = np.where(near, 0.5 * well_w2, w / dist**2)
        grad_ratio = np.where(near, np.sqrt(np.maximum(2.0 * well_w2, 0.0)), np.abs(w1) / np.sqrt(w))

    c_w = float(np.nanmin(coerc))
    C_w = float(np.nanmax(grad_ratio))
    K_w = float(np.max(np.abs(w2)))

    # far-field behaviour
    far = np.array([2.0 * r, 4.0 * r, -2.0 * r, -4.0 * r])
    w2_far = np.abs(pot.W2(far))
    K_w_finite = bool(np.all(w2_far[[1, 3]] <= 1.1 * np.maximum(w2_far[[0, 2]], K_w)))
    if pot.kind == PotentialKind.QUARTIC_TRUNCATED:
        c2, _, _ = quadratic_extension(pot.s0)
        c_w = min(c_w, c2)
        C_w = max(C_w, 2.0 * math.sqrt(c2))
        K_w = max(K_w, 2.0 * c2)
    else:
        w_far = pot.W(far)
        with np.errstate(divide="ignore", invalid="ignore"):
            c_far = w_far / _well_distance(pot, far) ** 2
            C_far = np.abs(pot.W1(far)) / np.sqrt(w_far)
        c_w = float(np.nanmin(np.append(c_far, c_w)))
        C_grows = bool(np.any(C_far[[1, 3]] > 1.1 * np.maximum(C_far[[0, 2]], C_w)))
        C_w = math.inf if C_grows else float(np.nanmax(np.append(C_far, C_w)))
        if not K_w_finite:
            K_w = math.inf

    violations = []
    c_w_positive = math.isfinite(c_w) and c_w > 0
    C_w_finite = math.isfinite(C_w)
    if not c_w_positive:
        violations.append(f"c_w degenerate ({c_w})")
    if not C_w_finite:
        violations.append("C_w unbounded")
    if not K_w_finite:
        violations.append("W'' unbounded at infinity")
    for v in violations:
        logger.warning(f"{pot.name}: {v}")
    return PotentialConstants(c_w=c_w, C_w=C_w, K_w=K_w, c_w_positive=c_w_positive, C_w_finite=C_w_finite,
                              K_w_finite=K_w_finite, violations=violations)


def check_hypotheses(pot: Potential, constants: Optional[PotentialConstants] = None) -> HypothesesReport:
    """Pass/fail per structural assumption on W, evaluated on the dense scan."""
    constants = constants or estimate_constants(pot)
    s = _scan(pot)
    w = pot.W(s)
    dist = _well_distance(pot, s)
    away = np.abs(dist) > 1e-6
    wells_ok = bool(np.allclose(pot.W(np.array(pot.wells)), 0.0, atol=1e-12) and np.all(w[away] > 0))
    c_w = constants.c_w
    coercive = constants.c_w_positive and bool(np.all(w >= c_w * dist**2 * (1.0 - 1e-9) - 1e-12))
    with np.errstate(divide="ignore", invalid="ignore"):
        grad_ok = constants.C_w_finite and bool(
            np.all(np.abs(pot.W1(s)) <= constants.C_w * np.sqrt(np.maximum(w, 0.0)) * (1.0 + 1e-9) + 1e-9))
    big = np.abs(s) >= 2.0
    growth = constants.c_w_positive and bool(np.all(w[big] >= 0.25 * c_w * s[big] ** 2))
    items = {
        "wells": wells_ok,
        "coercivity": coercive,
        "gradient_bound": grad_ok,
        "second_derivative_bound": constants.K_w_finite,
        "quadratic_growth": growth,
    }
    for name, ok in items.items():
        if not ok:
            logger.warning(f"{pot.name}: hypothesis '{name}' fails")
    return HypothesesReport(items=items, constants=constants)


def mm_floor(pot: Potential) -> float:
    """Integral of sqrt(W) between the wells."""
    lo, hi = pot.wells
    value, _ = integrate.quad(lambda s: math.sqrt(max(float(pot.W(s)), 0.0)), lo, hi, epsabs=1e-13, epsrel=1e-12)
    return value
