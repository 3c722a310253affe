import logging

logger = logging.getLogger(__name__)


class RaftminError(Exception):
    """Base exception class for raftmin; carries the CLI exit code."""
    def __init__(self, detail: str, exit_code: int = 1):
        self.detail = detail
        self.exit_code = exit_code
        super().__init__(self.detail)


class ConfigError(RaftminError):
    """Raised for invalid or contradictory run configuration."""
    def __init__(self, detail: str):
        super().__init__(detail, exit_code=2)


class GridError(ConfigError):
    """Raised for inadmissible grids or fields living on different grids."""


class GeometryError(ConfigError):
    """Raised for degenerate or unsupported interface geometries."""


class FieldFormatError(RaftminError):
    """Raised when a field file cannot be read or does not match the grid."""
    def __init__(self, path: str, detail: str = None):
        message = f"Invalid field file: {path}"
        if detail:
            message += f" - {detail}"
        super().__init__(message, exit_code=3)


class NumericalError(RaftminError):
    """Raised when a computation produces no usable finite result."""
    def __init__(self, detail: str):
        super().__init__(detail, exit_code=4)


class DivergenceError(NumericalError):
    """Raised when the energy drops below the divergence floor."""
    def __init__(self, eps: float, q: float, energy: float, floor: float):
        self.eps = eps
        self.q = q
        super().__init__(
            f"Energy {energy:.6g} fell below floor {floor:.6g} at eps={eps}, q={q}; "
            f"the functional may be unbounded from below in this regime"
        )


class UnboundedBelowError(NumericalError):
    """Raised when the single-mode energy has no minimum (q >= 1)."""
    def __init__(self, q: float):
        self.q = q
        super().__init__(f"Single-mode energy is unbounded below for q={q} >= 1")


class StepUnderflowError(NumericalError):
    """Raised when step-size control shrinks dt below the configured minimum."""
    def __init__(self, dt: float, min_dt: float, step: int):
        super().__init__(f"Step size {dt:.3e} fell below min_dt={min_dt:.3e} at step {step}")


def exit_code_for(exc: BaseException) -> int:
    """Map an exception raised during a run to the CLI exit-code contract."""
    from pydantic import ValidationError

    if isinstance(exc, RaftminError):
        logger.error(f"{type(exc).__name__}: {exc.detail}")
        return exc.exit_code
    if isinstance(exc, ValidationError):
        logger.error(f"ValidationError: {exc.errors()}")
        return 2
    if isinstance(exc, OSError):
        logger.error(f"I/O error: {exc}")
        return 3
    logger.exception(f"Unhandled exception: {str(exc)}")
    return 1
