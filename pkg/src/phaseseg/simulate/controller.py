"""Cartesian impedance controller with a moving setpoint."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numpy.typing import ArrayLike

from ..exceptions import ValidationError
from ..utils import as_matrix, as_vector, frozen
from .world import ContactWorld

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class ControllerDefaults:
    """
    Gains given to extracted primitives.

    Damping defaults to the critical value ``2 sqrt(k)`` of the translational
    stiffness for a unit mass.
    """

    stiffness_trans: float = 500.0  # N/m
    stiffness_rot: float = 10.0  # N m/rad
    damping: Optional[float] = None

    def __post_init__(self):
        if self.stiffness_trans < 0 or self.stiffness_rot < 0:
            raise ValueError("stiffness must be non-negative")
        if self.damping is not None and self.damping < 0:
            raise ValueError("damping must be non-negative")

    @property
    def damping_value(self) -> float:
        if self.damping is not None:
            return float(self.damping)
        return 2.0 * math.sqrt(self.stiffness_trans)

    def stiffness(self, m: int) -> np.ndarray:
        """Diagonal stiffness for an ``m``-D state; entries past the third are rotational."""
        diag = np.full(m, self.stiffness_trans)
        if m == 6:
            diag[3:] = self.stiffness_rot
        return np.diag(diag)


@dataclass(frozen=True, eq=False)
class PhasePrimitive:
    """Controller parameters of one phase: direction, speed and gains."""

    v_dir: np.ndarray
    speed: float
    stiffness: np.ndarray
    damping: float
    low_confidence: bool = False

    def __post_init__(self):
        v = as_vector(self.v_dir, "v_dir")
        if abs(float(np.linalg.norm(v)) - 1.0) > _UNIT_TOL:
            raise ValidationError("v_dir must be a unit vector")
        if not self.speed > 0:
            raise ValidationError("speed must be positive")
        k = as_matrix(self.stiffness, "stiffness", (v.shape[0], v.shape[0]))
        if np.any(k != np.diag(np.diag(k))) or np.any(np.diag(k) < 0):
            raise ValidationError("stiffness must be diagonal and non-negative")
        if not self.damping >= 0:
            raise ValidationError("damping must be non-negative")
        object.__setattr__(self, "v_dir", frozen(v))
        object.__setattr__(self, "stiffness", frozen(k))
        object.__setattr__(self, "speed", float(self.speed))
        object.__setattr__(self, "damping", float(self.damping))

    @property
    def m(self) -> int:
        return int(self.v_dir.shape[0])

    @property
    def velocity(self) -> np.ndarray:
        return self.v_dir * self.speed


class ImpedanceStep(NamedTuple):
    x: np.ndarray
    wrench: np.ndarray
    x_star: np.ndarray
    regime: int


def impedance_step(
    x: ArrayLike,
    x_star: ArrayLike,
    primitive: PhasePrimitive,
    world: ContactWorld,
    dt: float,
    *,
    hold: bool = False,
) -> ImpedanceStep:
    """
    Advance the setpoint and settle the tool for one step.

    The setpoint moves ``x*_next = x* + v_dir * speed * dt`` (unless ``hold``).
    The controller force ``K (x*_next - x_next) + c (v* - v)`` with
    ``v = (x_next - x) / dt`` is balanced against the environment, which makes
    the unconstrained equilibrium ``x_ref = K_eff^-1 (K x*_next + c/dt (x + v* dt))``
    with ``K_eff = K + c/dt I``. Feed-forward dynamics are taken as exactly
    compensated.

    Returns:
        The new position, the measured contact wrench, the new setpoint and
        the contact regime.

    Raises:
        InstabilityError: If the contact penetrates too deep.
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    m = world.dim
    if primitive.m != m:
        raise ValidationError(
            f"primitive is {primitive.m}-D, {world.scenario.value} world is {m}-D"
        )
    x = as_vector(x, "x", m)
    x_star = as_vector(x_star, "x_star", m)

    v_cmd = np.zeros(m) if hold else primitive.velocity
    x_star_next = x_star + v_cmd * dt
    k = np.diag(primitive.stiffness)
    c_dt = primitive.damping / dt
    k_eff = k + c_dt
    if np.any(k_eff <= 0):
        raise ValidationError("stiffness and damping cannot both be zero")
    x_ref = (k * x_star_next + c_dt * (x + v_cmd * dt)) / k_eff

    contact = world.resolve(x_ref, x, k_eff)
    return ImpedanceStep(contact.x, contact.wrench, x_star_next, contact.regime)
