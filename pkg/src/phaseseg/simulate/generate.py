"""
Synthetic demonstrations.

Scripted demonstrations run the impedance controller through a contact world
and label every sample with the contact regime actually active, not the index
of the script segment. :func:`sample_from_model` instead draws data from a
known model, for checks where the true parameters must be available.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from ..core import Demonstration, HmmModel
from ..exceptions import InstabilityError, ValidationError
from ..inference import initial_distribution, transition_matrix
from ..utils import as_matrix, as_vector, frozen, unit
from .controller import ControllerDefaults, PhasePrimitive, impedance_step
from .world import ContactWorld, Scenario

DEFAULT_DT = 0.01  # 100 Hz


@dataclass(frozen=True, eq=False)
class ScriptSegment:
    """Move along ``v_dir`` at ``speed`` for ``duration`` seconds."""

    v_dir: np.ndarray
    speed: float
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "v_dir", frozen(unit(self.v_dir, "v_dir")))
        if not self.speed > 0:
            raise ValidationError("speed must be positive")
        if not self.duration > 0:
            raise ValidationError("duration must be positive")

    def steps(self, dt: float) -> int:
        return int(round(self.duration / dt))


def valley_script(side: str = "left") -> list[ScriptSegment]:
    """
    Descend onto a plate and press straight down so the plate guides the tool
    to the floor line. Once there, bring the setpoint back over the floor line
    and ease off so both plates carry the load, then slide along the
    floor.

    The sideways move is the only part that depends on ``side``; after it the
    floor wrench is the same for both sides.
    """
    if side not in ("left", "right"):
        raise ValidationError(f"side must be 'left' or 'right', got {side!r}")
    inward = 1.0 if side == "left" else -1.0
    down = (0.0, 0.0, -1.0)
    return [
        ScriptSegment(down, 0.03, 3.0),
        ScriptSegment(down, 0.03, 1.6),
        # 2 cm toward the floor line and 2 cm up
        ScriptSegment((inward, 0.0, 1.0), 0.04 * math.sqrt(2.0), 0.5),
        ScriptSegment((0.0, 1.0, 0.0), 0.02, 3.9),
    ]


def hose_script() -> list[ScriptSegment]:
    """Lower onto the coupler face, then turn about z while pressing lightly."""
    return [
        ScriptSegment((0.0, 0.0, -1.0, 0.0, 0.0, 0.0), 0.02, 2.5),
        ScriptSegment((0.0, 0.0, -0.01, 0.0, 0.0, 1.0), 0.6, 1.0),
    ]


def free_script() -> list[ScriptSegment]:
    return [
        ScriptSegment((1.0, 0.0, 0.0), 0.02, 2.0),
        ScriptSegment((0.0, 1.0, 0.0), 0.02, 2.0),
    ]


def default_start(scenario: Scenario, side: str = "left") -> np.ndarray:
    """Training start pose of each scenario; valley starts sit above a plate."""
    scenario = Scenario(scenario)
    if scenario is Scenario.VALLEY:
        x0 = -0.02 if side == "left" else 0.02
        return np.array([x0, 0.0, 0.1])
    if scenario is Scenario.HOSE_COUPLER:
        return np.array([0.0, 0.0, 0.045, 0.0, 0.0, 0.0])
    return np.zeros(3)


def default_script(scenario: Scenario, side: str = "left") -> list[ScriptSegment]:
    scenario = Scenario(scenario)
    if scenario is Scenario.VALLEY:
        return valley_script(side)
    if scenario is Scenario.HOSE_COUPLER:
        return hose_script()
    return free_script()


@dataclass(frozen=True, eq=False)
class LabeledDemo:
    """A demonstration with its ground-truth regime per sample."""

    demo: Demonstration
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if labels.shape != (len(self.demo),):
            raise ValidationError(
                f"{labels.shape[0]} labels for a demonstration of {len(self.demo)}"
            )
        labels = labels.copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def step_labels(self) -> np.ndarray:
        """Labels aligned with the ``T - 1`` emissions."""
        return self.labels[:-1]


def measure(
    rng: np.random.Generator, world: ContactWorld, x: np.ndarray, wrench: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Add the world's sensor noise to a pose and wrench."""
    s = x + rng.normal(0.0, world.noise_pos, x.shape) if world.noise_pos else x.copy()
    if world.noise_force:
        wrench = wrench + rng.normal(0.0, world.noise_force, wrench.shape)
    return s, wrench.copy()


def generate_demo(
    world: ContactWorld,
    script: Sequence[ScriptSegment],
    dt: float = DEFAULT_DT,
    seed: int = 0,
    *,
    start: Optional[ArrayLike] = None,
    controller: ControllerDefaults = ControllerDefaults(),
    label: str = "",
) -> LabeledDemo:
    """
    Run a scripted demonstration through ``world``.

    The demonstration has one sample per controller step: the measured pose
    and wrench before the step, with noise drawn from ``default_rng(seed)``.

    Raises:
        ValidationError: If the script is empty or does not match the world.
        InstabilityError: If the contact becomes unstable.
    """
    if not script:
        raise ValidationError("script must have at least one segment")
    if not dt > 0:
        raise ValidationError("dt must be positive")
    m = world.dim
    x = default_start(world.scenario) if start is None else as_vector(start, "start", m)
    x_star = x.copy()
    stiffness = controller.stiffness(m)
    rng = np.random.default_rng(seed)

    contact = world.resolve(x, x, np.diag(stiffness) + controller.damping_value / dt)
    x, wrench, regime = contact.x, contact.wrench, contact.regime

    states, wrenches, labels = [], [], []
    step = 0
    for segment in script:
        if segment.v_dir.shape[0] != m:
            raise ValidationError(
                f"script segment is {segment.v_dir.shape[0]}-D, world is {m}-D"
            )
        primitive = PhasePrimitive(
            segment.v_dir, segment.speed, stiffness, controller.damping_value
        )
        for _ in range(segment.steps(dt)):
            s_meas, a_meas = measure(rng, world, x, wrench)
            states.append(s_meas)
            wrenches.append(a_meas)
            labels.append(regime)
            try:
                x, wrench, x_star, regime = impedance_step(x, x_star, primitive, world, dt)
            except InstabilityError as exc:
                exc.step = step
                raise
            step += 1

    demo = Demonstration.from_arrays(np.vstack(states), np.vstack(wrenches), dt, label)
    return LabeledDemo(demo, np.asarray(labels))


def sample_from_model(
    model: HmmModel,
    wrenches: ArrayLike,
    s0: ArrayLike,
    seed: int,
    dt: float = DEFAULT_DT,
    label: str = "",
) -> LabeledDemo:
    """
    Draw states and a phase path from ``model`` under a given wrench sequence.

    The returned labels hold the phase of each emission; the last sample
    repeats the final phase.
    """
    a_raw = as_matrix(wrenches, "wrenches")
    if a_raw.shape[1] + 1 != model.d:
        raise ValidationError(
            f"wrenches have {a_raw.shape[1]} columns, model expects {model.d - 1}"
        )
    rng = np.random.default_rng(seed)
    T = a_raw.shape[0]
    interactions = np.hstack([a_raw, np.ones((T, 1))])
    states = np.empty((T, model.m))
    states[0] = as_vector(s0, "s0", model.m)
    phases = np.empty(T, dtype=int)

    for t in range(T - 1):
        phi = model.phi(states[t][None, :], interactions[t][None, :])[0]
        if t == 0:
            probs = initial_distribution(model.weights, phi)
        else:
            probs = transition_matrix(model.weights, phi)[phases[t - 1]]
        phases[t] = rng.choice(model.n_phases, p=probs)
        dyn = model.dynamics[phases[t]]
        mean = dyn.A @ states[t] + dyn.B @ interactions[t]
        states[t + 1] = rng.multivariate_normal(mean, dyn.Sigma)
    phases[T - 1] = phases[T - 2] if T > 1 else 0

    demo = Demonstration.from_arrays(states, a_raw, dt, label)
    return LabeledDemo(demo, phases)
