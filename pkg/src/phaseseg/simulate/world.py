"""
Quasi-static penalty-contact worlds.

A world resolves where the tool settles given the unconstrained equilibrium
``x_ref`` of the controller and its effective stiffness ``K_eff``. Surfaces
are half-spaces ``n . p >= h`` pushing back with ``stiffness_env`` times the
penetration depth; the settled position minimises

    1/2 (p - x_ref)^T K_eff (p - x_ref) + 1/2 k_env sum_i max(0, h_i - n_i . p)^2

which is found by enumerating active sets. Coulomb friction then holds back
the tangential part of the step by at most ``mu * |f_n|``.

The reported wrench is the environment's reaction on the tool,
``K_eff (p - x_ref)``: exactly zero when nothing is in contact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Union

import numpy as np
from numpy.typing import ArrayLike

from ..exceptions import InstabilityError, ValidationError

# Penetration deeper than this many penalty resolutions is unstable.
INSTABILITY_FACTOR = 10.0


class Scenario(str, Enum):
    VALLEY = "valley"
    HOSE_COUPLER = "hose"
    FREE_SPACE = "free"


# Contact regimes, used as ground-truth labels
FREE = 0
ONE_PLATE = 1
VALLEY_FLOOR = 2
ENGAGED = 1


@dataclass(frozen=True)
class WorldGeometry:
    """
    Scenario geometry.

    The valley is two plates meeting in a floor line parallel to y through
    ``(apex_x, ., apex_z)``, each inclined ``plate_angle_deg`` from horizontal.
    The hose coupler face is the plane ``z = coupler_z``; once the tool
    presses on it, rotation about z meets ``detent_torque`` and stops at
    ``interlock_deg``.
    """

    plate_angle_deg: float = 45.0
    apex_x: float = 0.0
    apex_z: float = 0.0

    coupler_z: float = 0.0
    detent_torque: float = 0.3  # N m
    interlock_deg: float = 30.0

    penalty_resolution: float = 1e-3  # m

    def __post_init__(self):
        if not 0.0 < self.plate_angle_deg < 90.0:
            raise ValueError("plate_angle_deg must be in (0, 90)")
        if self.detent_torque < 0:
            raise ValueError("detent_torque must be non-negative")
        if not 0.0 < self.interlock_deg < 180.0:
            raise ValueError("interlock_deg must be in (0, 180)")
        if self.penalty_resolution <= 0:
            raise ValueError("penalty_resolution must be positive")

    @property
    def interlock(self) -> float:
        return math.radians(self.interlock_deg)


class Contact(NamedTuple):
    x: np.ndarray
    wrench: np.ndarray
    regime: int
    penetration: float


def _plane_solve(
    p_ref: np.ndarray,
    k_eff: np.ndarray,
    normals: np.ndarray,
    offsets: np.ndarray,
    k_env: float,
) -> tuple[np.ndarray, tuple[int, ...]]:
    """Minimum of the penalty energy over all active sets of the planes."""

    def energy(p: np.ndarray) -> float:
        d = p - p_ref
        gap = np.maximum(offsets - normals @ p, 0.0)
        return 0.5 * float(d @ (k_eff * d)) + 0.5 * k_env * float(gap @ gap)

    if np.all(normals @ p_ref >= offsets):
        return p_ref, ()
    best_p, best_e = p_ref, energy(p_ref)
    n_planes = normals.shape[0]
    for size in range(1, n_planes + 1):
        for subset in itertools.combinations(range(n_planes), size):
            ns = normals[list(subset)]
            lhs = np.diag(k_eff) + k_env * ns.T @ ns
            rhs = k_eff * p_ref + k_env * ns.T @ offsets[list(subset)]
            p = np.linalg.solve(lhs, rhs)
            e = energy(p)
            if e < best_e:
                best_p, best_e = p, e
    active = tuple(int(i) for i in np.flatnonzero(normals @ best_p < offsets))
    return best_p, active


def _tangent_projector(normals: np.ndarray) -> np.ndarray:
    dim = normals.shape[1]
    if normals.shape[0] == 0:
        return np.eye(dim)
    q, _ = np.linalg.qr(normals.T)
    return np.eye(dim) - q @ q.T


@dataclass(frozen=True)
class ContactWorld:
    """
    A scenario with its surfaces and sensor noise.

    States are positions (x, y, z) for the valley and free space, and a pose
    (x, y, z, rx, ry, rz) with rotation-vector orientation for the hose
    coupler. Wrenches match: force for the 3-D worlds, force plus torque for
    the hose coupler.
    """

    scenario: Union[Scenario, str] = Scenario.VALLEY
    geometry: WorldGeometry = field(default_factory=WorldGeometry)
    stiffness_env: float = 1e4  # N/m
    friction_mu: float = 0.2
    noise_force: float = 0.0  # N
    noise_pos: float = 0.0  # m

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if self.stiffness_env <= 0:
            raise ValueError("stiffness_env must be positive")
        if self.friction_mu < 0:
            raise ValueError("friction_mu must be non-negative")
        if self.noise_force < 0 or self.noise_pos < 0:
            raise ValueError("noise levels must be non-negative")

    @property
    def dim(self) -> int:
        """State dimension m."""
        return 6 if self.scenario is Scenario.HOSE_COUPLER else 3

    @property
    def wrench_dim(self) -> int:
        return self.dim

    def planes(self) -> tuple[np.ndarray, np.ndarray]:
        """Inward unit normals (rows) and offsets of the translational surfaces."""
        g = self.geometry
        if self.scenario is Scenario.VALLEY:
            theta = math.radians(g.plate_angle_deg)
            s, c = math.sin(theta), math.cos(theta)
            normals = np.array([[s, 0.0, c], [-s, 0.0, c]])
            apex = np.array([g.apex_x, 0.0, g.apex_z])
            return normals, normals @ apex
        if self.scenario is Scenario.HOSE_COUPLER:
            return np.array([[0.0, 0.0, 1.0]]), np.array([g.coupler_z])
        return np.zeros((0, 3)), np.zeros(0)

    def resolve(
        self, x_ref: ArrayLike, x_prev: ArrayLike, k_eff: ArrayLike
    ) -> Contact:
        """
        Settle the tool against the surfaces.

        Args:
            x_ref: Unconstrained equilibrium of the controller.
            x_prev: Position at the start of the step, for friction.
            k_eff: Diagonal of the effective controller stiffness.

        Raises:
            InstabilityError: If the settled penetration exceeds ten penalty
                resolutions.
        """
        x_ref = np.asarray(x_ref, dtype=float)
        x_prev = np.asarray(x_prev, dtype=float)
        k_eff = np.asarray(k_eff, dtype=float)
        if x_ref.shape != (self.dim,) or k_eff.shape != (self.dim,):
            raise ValidationError(
                f"{self.scenario.value} world expects {self.dim}-D states"
            )

        normals, offsets = self.planes()
        p_ref, p_prev, k_t = x_ref[:3], x_prev[:3], k_eff[:3]
        p, active = _plane_solve(p_ref, k_t, normals, offsets, self.stiffness_env)

        penetration = 0.0
        if active:
            act_n = normals[list(active)]
            depths = offsets[list(active)] - act_n @ p
            penetration = float(depths.max())
            limit = INSTABILITY_FACTOR * self.geometry.penalty_resolution
            if penetration > limit:
                raise InstabilityError(
                    f"penetration {penetration:.4g} m exceeds {limit:.4g} m",
                    penetration=penetration,
                )
            p = self._apply_friction(p, p_prev, k_t, act_n, depths)

        x = x_ref.copy()
        x[:3] = p
        if self.scenario is Scenario.HOSE_COUPLER:
            x[5] = self._coupler_rotation(x_ref[5], x_prev[5], k_eff[5], bool(active))

        wrench = k_eff * (x - x_ref)
        return Contact(x, wrench, self._regime(active), penetration)

    def _apply_friction(
        self,
        p: np.ndarray,
        p_prev: np.ndarray,
        k_t: np.ndarray,
        normals: np.ndarray,
        depths: np.ndarray,
    ) -> np.ndarray:
        if self.friction_mu == 0.0:
            return p
        delta = _tangent_projector(normals) @ (p - p_prev)
        slide = float(np.linalg.norm(delta))
        if slide == 0.0:
            return p
        direction = delta / slide
        f_normal = self.stiffness_env * float(depths.sum())
        k_dir = float(direction @ (k_t * direction))
        hold = min(slide, self.friction_mu * f_normal / k_dir)
        return p - hold * direction

    def _coupler_rotation(
        self, rz_ref: float, rz_prev: float, k: float, engaged: bool
    ) -> float:
        if not engaged:
            return rz_ref
        g = self.geometry
        drive = k * (rz_ref - rz_prev)
        if abs(drive) <= g.detent_torque:
            rz = rz_prev
        else:
            rz = rz_ref - math.copysign(g.detent_torque / k, drive)
        # penalty stop at the interlock on either side
        stop = g.interlock
        if abs(rz) > stop:
            limit = math.copysign(stop, rz)
            rz = (k * rz + self.stiffness_env * limit) / (k + self.stiffness_env)
        return rz

    def _regime(self, active: tuple[int, ...]) -> int:
        if self.scenario is Scenario.VALLEY:
            return len(active)
        if self.scenario is Scenario.HOSE_COUPLER:
            return ENGAGED if active else FREE
        return FREE

    def regime_at(self, x: ArrayLike) -> int:
        """Contact regime of a resting pose, without any controller."""
        x = np.asarray(x, dtype=float)
        normals, offsets = self.planes()
        active = tuple(int(i) for i in np.flatnonzero(normals @ x[:3] < offsets))
        return self._regime(active)

    def goal_error(self, x: ArrayLike) -> float:
        """
        Distance to the goal: the floor line for the valley, the interlock
        angle for the hose coupler, zero in free space.
        """
        x = np.asarray(x, dtype=float)
        g = self.geometry
        if self.scenario is Scenario.VALLEY:
            return float(math.hypot(x[0] - g.apex_x, x[2] - g.apex_z))
        if self.scenario is Scenario.HOSE_COUPLER:
            return float(abs(abs(x[5]) - g.interlock))
        return 0.0
