"""Numeric policy shared by inference, learning and simulation."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class NumericPolicy:
    """
    Immutable numeric tolerances.

    The defaults suit position data in metres sampled at around 100 Hz. Override
    them for a block of code with :class:`phaseseg.policy_context.use_policy`.
    """

    # Covariances
    sigma_floor: float = 1e-9  # squared state units

    # Demonstrations
    dt_tolerance: float = 0.1  # relative deviation allowed in timestamp spacing

    # Responsibilities
    min_phase_mass: float = 10.0  # samples; below this a primitive is low-confidence
    negligible_mass: float = 1e-8  # below this an M-step keeps the old dynamics

    # Primitive extraction
    degenerate_gap: float = 0.1  # relative eigen-gap treated as a tie

    def __post_init__(self):
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")
        if not 0 < self.dt_tolerance < 1:
            raise ValueError("dt_tolerance must be in (0, 1)")
        if self.min_phase_mass < 0:
            raise ValueError("min_phase_mass must be non-negative")
        if self.negligible_mass <= 0:
            raise ValueError("negligible_mass must be positive")
        if not 0 <= self.degenerate_gap < 1:
            raise ValueError("degenerate_gap must be in [0, 1)")


# Default policy instance
DEFAULT_POLICY = NumericPolicy()
