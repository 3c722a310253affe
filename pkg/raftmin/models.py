from enum import Enum as PythonEnum


class Boundary(str, PythonEnum):
    NEUMANN = "neumann"
    PERIODIC = "periodic"


class PotentialKind(str, PythonEnum):
    QUARTIC_TRUNCATED = "quartic_truncated"
    QUARTIC = "quartic"
    PHYSICAL_QUARTIC = "physical_quartic"
    CUSTOM = "custom"


class FlowScheme(str, PythonEnum):
    L2_DESCENT = "l2_descent"
    SEMI_IMPLICIT_SPECTRAL = "semi_implicit_spectral"


class FlowStatus(str, PythonEnum):
    CONVERGED = "CONVERGED"
    MAX_STEPS = "MAX_STEPS"
    DIVERGED = "DIVERGED"
    STEP_UNDERFLOW = "STEP_UNDERFLOW"


class GeometryKind(str, PythonEnum):
    FLAT_SLAB = "flat_slab"
    POLYGON_2D = "polygon_2d"


class FieldSource(str, PythonEnum):
    CONST = "const"
    MODE = "mode"
    MODES = "modes"
    STEP = "step"
    RANDOM = "random"
    FILE = "file"


class ProfileInit(str, PythonEnum):
    SINE = "sine"
    RAMP = "ramp"
