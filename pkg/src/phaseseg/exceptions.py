"""Custom exceptions for phaseseg."""

from __future__ import annotations

from collections.abc import Sequence
from typing import Optional


class PhaseSegError(Exception):
    """Base exception for all phaseseg errors."""

    def context(self) -> dict[str, object]:
        """Structured attributes for machine-readable error records."""
        return {}


class ValidationError(PhaseSegError, ValueError):
    """Raised when an input violates a domain invariant."""

    def __init__(self, message: str, violations: Optional[Sequence[str]] = None):
        super().__init__(message)
        self.violations = list(violations or [])

    def context(self) -> dict[str, object]:
        return {"violations": list(self.violations)}

    def __repr__(self) -> str:
        return f"ValidationError('{self}', violations={self.violations})"


class NumericalError(PhaseSegError):
    """Raised when a covariance or normal-equation system is not usable."""

    def __init__(self, message: str, phase: Optional[int] = None):
        super().__init__(message)
        self.phase = phase

    def context(self) -> dict[str, object]:
        return {"phase": self.phase}

    def __repr__(self) -> str:
        return f"NumericalError('{self}', phase={self.phase})"


class FitError(PhaseSegError):
    """Raised when model fitting fails; carries the EM iteration."""

    def __init__(
        self,
        message: str,
        iteration: Optional[int] = None,
        n_phases: Optional[int] = None,
    ):
        super().__init__(message)
        self.iteration = iteration
        self.n_phases = n_phases

    def context(self) -> dict[str, object]:
        return {"iteration": self.iteration, "n_phases": self.n_phases}

    def __repr__(self) -> str:
        return (
            f"FitError('{self}', iteration={self.iteration}, "
            f"n_phases={self.n_phases})"
        )


class DivergenceError(FitError):
    """Raised when the transition-weight gradient descent keeps increasing the loss."""

    def __init__(self, message: str, phase: Optional[int], lr_lambda: float):
        super().__init__(message)
        self.phase = phase
        self.lr_lambda = lr_lambda

    def context(self) -> dict[str, object]:
        ctx = super().context()
        ctx.update({"phase": self.phase, "lr_lambda": self.lr_lambda})
        return ctx

    def __repr__(self) -> str:
        return (
            f"DivergenceError('{self}', phase={self.phase}, "
            f"lr_lambda={self.lr_lambda})"
        )


class InstabilityError(PhaseSegError):
    """Raised when the contact simulation penetrates too deep to be trusted."""

    def __init__(self, message: str, penetration: float, step: Optional[int] = None):
        super().__init__(message)
        self.penetration = penetration
        self.step = step

    def context(self) -> dict[str, object]:
        return {"penetration": self.penetration, "step": self.step}

    def __repr__(self) -> str:
        return (
            f"InstabilityError('{self}', penetration={self.penetration}, "
            f"step={self.step})"
        )


class SchemaError(PhaseSegError, ValueError):
    """Raised when a data or model file does not match the expected format."""

    def __init__(
        self, message: str, path: Optional[str] = None, row: Optional[int] = None
    ):
        super().__init__(message)
        self.path = path
        self.row = row

    def context(self) -> dict[str, object]:
        return {"path": self.path, "row": self.row}

    def __repr__(self) -> str:
        return f"SchemaError('{self}', path={self.path!r}, row={self.row})"


class ConfigError(PhaseSegError, ValueError):
    """Raised when run settings are missing or contradict each other."""
