import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from importlib import resources
from typing import ClassVar, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from raftmin.models import Boundary, FieldSource, FlowScheme, GeometryKind, PotentialKind, ProfileInit

COMMANDS = ("energy", "flow", "modes", "cell", "gamma", "nondim", "helmholtz")


@lru_cache(maxsize=None)
def membrane_data() -> Dict[str, Dict[str, float]]:
    """Tables of raftmin/data/membrane.toml."""
    raw = resources.files("raftmin.data").joinpath("membrane.toml").read_text(encoding="utf-8")
    return tomllib.loads(raw)


def sigma_window() -> Tuple[float, float]:
    window = membrane_data()["sigma_range"]
    return window["low"], window["high"]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(StrictModel):
    dims: int = Field(1, ge=1, le=3)
    extents: List[float] = [2.0]
    n: List[int] = [256]
    boundary: Boundary = Boundary.NEUMANN
    origin: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.extents) != self.dims or len(self.n) != self.dims:
            raise ValueError(f"extents and n must have {self.dims} entries")
        if self.origin is not None and len(self.origin) != self.dims:
            raise ValueError(f"origin must have {self.dims} entries")
        return self


class PotentialSpec(StrictModel):
    kind: PotentialKind = PotentialKind.QUARTIC_TRUNCATED
    s0: float = Field(2.0, gt=1.0)
    a2: Optional[float] = None
    a4: Optional[float] = None
    kappa: Optional[float] = None
    coupling: Optional[float] = None
    normalize: bool = True

    @model_validator(mode="after")
    def check_physical(self):
        if self.kind == PotentialKind.PHYSICAL_QUARTIC:
            missing = [k for k in ("a2", "a4", "kappa", "coupling") if getattr(self, k) is None]
            if missing:
                raise ValueError(f"physical_quartic requires {', '.join(missing)}")
        if self.kind == PotentialKind.CUSTOM:
            raise ValueError("custom potentials are built in code, not from config")
        return self


class EnergyParams(StrictModel):
    eps: float = Field(0.1, gt=0)
    q: float = 0.0


class PhysicalParams(StrictModel):
    a2: float
    a4: float = Field(gt=0)
    b: float = Field(gt=0)
    sigma: float = Field(gt=0)
    kappa: float = Field(gt=0)
    coupling: float
    L: float = Field(gt=0)
    strict: bool = False

    @field_validator("coupling")
    @classmethod
    def nonzero_coupling(cls, v):
        if v == 0:
            raise ValueError("coupling must be nonzero")
        return v

    @model_validator(mode="after")
    def check_sigma_window(self):
        lo, hi = sigma_window()
        if self.strict and not lo <= self.sigma <= hi:
            raise ValueError(f"sigma={self.sigma} outside the characteristic window [{lo}, {hi}]")
        return self

    @classmethod
    def characteristic(cls, **overrides) -> "PhysicalParams":
        """Characteristic membrane values bundled in raftmin/data/membrane.toml."""
        values = dict(membrane_data()["defaults"])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class FlowConfig(StrictModel):
    scheme: FlowScheme = FlowScheme.SEMI_IMPLICIT_SPECTRAL
    dt: float = Field(1e-3, gt=0)
    max_steps: int = Field(1000, ge=1)
    tolerance: float = Field(1e-8, gt=0)
    mass_constraint: Optional[float] = None
    seed: int = 0
    energy_floor: Optional[float] = None
    min_dt: float = Field(1e-12, gt=0)
    # None: dt for l2_descent, max(dt, 1) for semi_implicit_spectral
    max_dt: Optional[float] = Field(None, gt=0)
    stabilization: float = Field(4.0, ge=0)
    stall_tol: Optional[float] = Field(None, ge=0)
    stall_window: int = Field(50, ge=1)

    @model_validator(mode="after")
    def check_step_bounds(self):
        if self.max_dt is not None and self.max_dt < self.dt:
            raise ValueError(f"max_dt={self.max_dt} is below dt={self.dt}")
        return self


class FieldSpec(StrictModel):
    source: FieldSource = FieldSource.RANDOM
    value: float = 0.0
    index: Optional[List[int]] = None
    cos_mode: Optional[int] = Field(None, ge=0)
    amplitude: float = 0.1
    modes: List[Tuple[List[int], float]] = []
    axis: int = Field(0, ge=0, le=2)
    position: float = 0.0
    width: float = Field(0.05, gt=0)
    seed: int = 0
    band: Optional[int] = Field(None, ge=1)
    mean: float = 0.0
    path: Optional[str] = None

    @model_validator(mode="after")
    def check_source(self):
        if self.source == FieldSource.MODE and self.index is None and self.cos_mode is None:
            raise ValueError("mode fields need index or cos_mode")
        if self.source == FieldSource.MODES and not self.modes:
            raise ValueError("modes fields need a non-empty modes list")
        if self.source == FieldSource.FILE and not self.path:
            raise ValueError("file fields need a path")
        return self


class CellSpec(StrictModel):
    eps_grid: List[float] = [0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
    profile_dofs: int = Field(64, ge=16)
    clamp: float = Field(0.05, gt=0, lt=0.25)
    init: ProfileInit = ProfileInit.SINE
    max_iter: int = Field(400, ge=1)
    transverse_amplitudes: List[float] = []
    refine: bool = False

    @field_validator("eps_grid")
    @classmethod
    def eps_in_unit_interval(cls, v):
        if not v:
            raise ValueError("eps_grid must not be empty")
        for eps in v:
            if not 0 < eps <= 1:
                raise ValueError(f"cell scale {eps} outside (0, 1]")
        return sorted(set(v))


class GammaSpec(StrictModel):
    geometry: GeometryKind = GeometryKind.FLAT_SLAB
    eps_list: List[float] = [0.1, 0.05, 0.02]
    axis: int = Field(0, ge=0, le=2)
    offset: float = 0.0
    vertices: Optional[List[Tuple[float, float]]] = None
    corner_delta: float = Field(0.2, gt=0)
    trend_floor: float = Field(1e-6, ge=0)
    saturation_tol: float = Field(1e-5, ge=0)
    final_tol: float = Field(0.15, gt=0)

    @field_validator("eps_list")
    @classmethod
    def positive_eps(cls, v):
        if not v or any(eps <= 0 for eps in v):
            raise ValueError("eps_list must hold positive values")
        return sorted(v, reverse=True)


class SweepSpec(StrictModel):
    q_list: List[float] = []
    eps_list: List[float] = []
    sigma_list: List[float] = []
    nmax: int = Field(16, ge=1)


class RunConfig(StrictModel):
    command: Literal["energy", "flow", "modes", "cell", "gamma", "nondim", "helmholtz"] = "energy"
    output_dir: str = "raftmin-out"
    seed: int = 0
    characteristic: bool = False
    grid: GridSpec = GridSpec()
    potential: PotentialSpec = PotentialSpec()
    energy: EnergyParams = EnergyParams()
    physical: Optional[PhysicalParams] = None
    flow: FlowConfig = FlowConfig()
    field: FieldSpec = FieldSpec()
    cell: CellSpec = CellSpec()
    gamma: GammaSpec = GammaSpec()
    sweep: SweepSpec = SweepSpec()

    @model_validator(mode="before")
    @classmethod
    def propagate_seed(cls, data):
        # Sections without their own seed inherit the run seed
        if isinstance(data, dict) and "seed" in data:
            data = dict(data)
            for section in ("field", "flow"):
                sub = data.get(section)
                if sub is None:
                    data[section] = {"seed": data["seed"]}
                elif isinstance(sub, dict) and "seed" not in sub:
                    data[section] = {**sub, "seed": data["seed"]}
        return data


class EnergyBreakdown(StrictModel):
    potential: float = 0.0
    negative_quadratic_or_gradient: float = 0.0
    gradient: float = 0.0
    laplacian_sq: float = 0.0
    grad_laplacian_sq: float = 0.0
    nonlocal_: float = Field(0.0, alias="nonlocal")
    finite: bool = True
    diagnostic: Optional[str] = None

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    TERM_NAMES: ClassVar[Tuple[str, ...]] = ("potential", "negative_quadratic_or_gradient", "gradient", "laplacian_sq", "grad_laplacian_sq", "nonlocal")

    @computed_field
    @property
    def total(self) -> float:
        if not self.finite:
            return math.inf
        return math.fsum(self.terms().values())

    def terms(self) -> Dict[str, float]:
        return {
            "potential": self.potential,
            "negative_quadratic_or_gradient": self.negative_quadratic_or_gradient,
            "gradient": self.gradient,
            "laplacian_sq": self.laplacian_sq,
            "grad_laplacian_sq": self.grad_laplacian_sq,
            "nonlocal": self.nonlocal_,
        }


class PotentialConstants(StrictModel):
    c_w: float
    C_w: float
    K_w: float
    c_w_positive: bool
    C_w_finite: bool
    K_w_finite: bool
    violations: List[str] = []


class HypothesesReport(StrictModel):
    items: Dict[str, bool]
    constants: PotentialConstants

    @property
    def passed(self) -> bool:
        return all(self.items.values())


class WellReport(StrictModel):
    wells: Tuple[float, float]
    unit_wells: bool
    double_well: bool
    scale: float


class LowerBoundReport(StrictModel):
    lhs: float
    rhs: float
    margin: float
    I_eps: float
    q: float
    q_star: float
    c_omega: float
    q0: float
    q_admissible: bool
    holds: bool


class ModeRow(StrictModel):
    n: int
    wavenumber: float
    eps2_lambda2: float
    F_qn: float
    destabilizing: bool
    is_min: bool = False


class TrajectoryRow(StrictModel):
    step: int
    energy: float
    grad_norm: float
    mean: float
    dominant_wavenumber: float


class NondimResult(StrictModel):
    sigma: float
    eps: float
    q: float
    w_scale: float
    intrinsic_length: float


class ReductionReport(StrictModel):
    full_scaled: float
    reduced: float
    rel_err: float
    ok: bool
    terms: Dict[str, float]


class LongwaveReport(StrictModel):
    longwave: float
    reduced: float
    gap: float
    gap_rel: float
    flagged: bool


class GammaRow(StrictModel):
    eps: float
    energy: float
    md_times_per: float
    ratio: float
    residual: float
    l2_to_sharp: float


class GammaTable(StrictModel):
    rows: List[GammaRow]
    md: float
    perimeter: float
    eps0: float
    trend_ok: bool
    saturated: bool
    final_ok: bool
    observed_rate: Optional[float] = None


class PolygonReport(StrictModel):
    eps: float
    energy: float
    md_plus_rho_times_per: float
    corner_allowance: float
    ratio: float


class CellScanRow(StrictModel):
    eps: float
    energy: float
    iterations: int
    converged: bool


class TransverseReport(StrictModel):
    base_energy: float
    rows: List[Tuple[float, float]]
    improves: bool
