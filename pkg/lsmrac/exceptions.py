from __future__ import annotations


class LsmracError(Exception):
    """Base class for every error raised by lsmrac."""


class ContractViolationError(LsmracError, ValueError):
    """Raised when an operation receives arguments that break its contract."""


class MatchingError(LsmracError):
    """Raised when the matching condition cannot be met or verified."""

    def __init__(self, message: str, *, a_residual: float | None = None, b_residual: float | None = None) -> None:
        super().__init__(message)
        self.a_residual = a_residual
        self.b_residual = b_residual


class NumericalError(LsmracError, ArithmeticError):
    """Raised when a matrix that must be positive definite is not."""


class SimulationAbortedError(LsmracError):
    """Raised when a simulated state stops being finite."""

    def __init__(self, message: str, *, step: int, robot: int) -> None:
        super().__init__(f"{message} (step={step}, robot={robot})")
        self.step = step
        self.robot = robot


class ConfigValidationError(LsmracError, ValueError):
    """Raised when a configuration document fails validation."""

    def __init__(self, message: str, *, field_path: str = "") -> None:
        prefix = f"{field_path}: " if field_path else ""
        super().__init__(prefix + message)
        self.field_path = field_path
        self.reason = message


class HorizonMismatchError(LsmracError, ValueError):
    """Raised when two runs being compared have different horizons."""
