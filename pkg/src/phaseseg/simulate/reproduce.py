"""Closed-loop reproduction: the online filter picks the active primitive."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from ..core import HmmModel, feature
from ..exceptions import InstabilityError, ValidationError
from ..inference import ForwardState, count_switches, filter_init, filter_step
from ..utils import as_vector, frozen
from .controller import PhasePrimitive, impedance_step
from .generate import measure
from .world import ContactWorld

logger = logging.getLogger(__name__)

DEFAULT_DWELL = 0.5  # s


@dataclass(frozen=True, eq=False)
class TraceStep:
    t: float
    x_star: np.ndarray
    x: np.ndarray
    wrench: np.ndarray
    phase: int
    primitive: int
    regime: int

    def __post_init__(self):
        for name in ("x_star", "x", "wrench"):
            object.__setattr__(self, name, frozen(getattr(self, name)))


@dataclass(frozen=True, eq=False)
class ReproductionTrace:
    """
    Per-step record of a reproduction. ``phase`` is the filter's estimate
    after the step; ``primitive`` is the primitive that drove it.
    """

    steps: tuple[TraceStep, ...]
    dt: float
    terminated: bool

    def __post_init__(self):
        if not self.steps:
            raise ValidationError("a trace needs at least one step")
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.steps])

    @property
    def phases(self) -> np.ndarray:
        return np.array([s.phase for s in self.steps], dtype=int)

    @property
    def positions(self) -> np.ndarray:
        return np.vstack([s.x for s in self.steps])

    @property
    def wrenches(self) -> np.ndarray:
        return np.vstack([s.wrench for s in self.steps])

    @property
    def final_x(self) -> np.ndarray:
        return self.steps[-1].x

    def phase_sequence(self) -> list[int]:
        """Phases in order of visit, consecutive repeats collapsed."""
        seq: list[int] = []
        for phase in self.phases:
            if not seq or seq[-1] != phase:
                seq.append(int(phase))
        return seq

    def switch_times(self) -> list[tuple[float, int, int]]:
        """``(t, from_phase, to_phase)`` for every change of the estimate."""
        out = []
        for prev, cur in zip(self.steps, self.steps[1:]):
            if cur.phase != prev.phase:
                out.append((cur.t, prev.phase, cur.phase))
        return out

    @property
    def n_switches(self) -> int:
        return count_switches(self.phases)


def reproduce(
    model: HmmModel,
    primitives: Sequence[PhasePrimitive],
    world: ContactWorld,
    start: ArrayLike,
    dt: float,
    max_steps: int,
    *,
    seed: int = 0,
    dwell: float = DEFAULT_DWELL,
) -> ReproductionTrace:
    """
    Run the primitives in closed loop under the online phase filter.

    Reproduction starts with primitive 0; after every step the measured
    ``(s, a, s_next)`` is fed to the filter and the primitive follows its
    argmax. The setpoint is continuous across switches. Stops after
    ``max_steps`` or once the last phase has persisted for ``dwell`` seconds.

    Raises:
        ValidationError: If primitives and model disagree.
        InstabilityError: If the contact becomes unstable.
    """
    if len(primitives) != model.n_phases:
        raise ValidationError(
            f"{len(primitives)} primitives for a {model.n_phases}-phase model"
        )
    if model.m != world.dim or model.d != world.wrench_dim + 1:
        raise ValidationError(
            f"model (m={model.m}, d={model.d}) does not fit the "
            f"{world.scenario.value} world"
        )
    if max_steps < 1:
        raise ValidationError("max_steps must be at least 1")
    if not dt > 0 or dwell < 0:
        raise ValidationError("dt must be positive and dwell non-negative")

    rng = np.random.default_rng(seed)
    x = as_vector(start, "start", world.dim)
    x_star = x.copy()
    active = 0
    first = primitives[0]
    contact = world.resolve(x, x, np.diag(first.stiffness) + first.damping / dt)
    x = contact.x
    s_prev, a_prev = measure(rng, world, x, contact.wrench)

    last = model.n_phases - 1
    dwell_steps = int(round(dwell / dt))
    in_last = 0
    terminated = False
    state: Optional[ForwardState] = None
    steps: list[TraceStep] = []

    for k in range(max_steps):
        driving = active
        try:
            x, wrench, x_star, regime = impedance_step(
                x, x_star, primitives[driving], world, dt
            )
        except InstabilityError as exc:
            exc.step = k
            raise
        s_meas, a_meas = measure(rng, world, x, wrench)
        if state is None:
            state = filter_init(model, s_prev, feature(a_prev), s_meas)
        else:
            state = filter_step(state, model, s_prev, feature(a_prev), s_meas)
        phase = state.phase_estimate
        steps.append(
            TraceStep((k + 1) * dt, x_star, x, wrench, phase, driving, regime)
        )

        if phase != active:
            logger.info("Step %d: switching primitive %d -> %d", k, active, phase)
            active = phase
        in_last = in_last + 1 if phase == last else 0
        if in_last >= max(dwell_steps, 1):
            terminated = True
            break
        s_prev, a_prev = s_meas, a_meas

    return ReproductionTrace(tuple(steps), dt, terminated)
