"""Shared fixtures: a known 3-phase model, data drawn from it, and valley demos."""

import numpy as np
import pytest

from phaseseg.core import Demonstration, HmmModel, PhaseDynamics, TransitionWeights
from phaseseg.policy_context import _current_policy
from phaseseg.simulate import (
    ContactWorld,
    Scenario,
    default_start,
    generate_demo,
    sample_from_model,
    valley_script,
)

REFERENCE_A = [
    [[0.9, 0.05], [-0.05, 0.9]],
    [[0.95, 0.0], [0.0, 0.85]],
    [[0.85, -0.05], [0.05, 0.95]],
]
REFERENCE_B = [
    [[0.0, 0.0, 0.1], [0.0, 0.0, -0.05]],
    [[0.01, 0.02, 0.3], [0.0, -0.01, 0.1]],
    [[-0.02, 0.01, 0.4], [0.01, 0.02, 0.1]],
]
# Transition weights toward each destination phase over features (fx, fz, 1)
REFERENCE_U = [[0.0, 0.0, 0.0], [0.0, -3.0, -15.0], [3.0, -3.0, -30.0]]
REFERENCE_NOISE = 1e-4


def build_reference_model() -> HmmModel:
    dynamics = [
        PhaseDynamics(np.array(a), np.array(b), REFERENCE_NOISE * np.eye(2))
        for a, b in zip(REFERENCE_A, REFERENCE_B)
    ]
    u = np.array(REFERENCE_U)
    w = np.tile(u, (3, 1, 1))
    w[np.arange(3), np.arange(3), -1] += 2.0
    return HmmModel(dynamics=dynamics, weights=TransitionWeights(w0=u, w=w))


def regime_wrenches(rng, block=50, n_blocks=24):
    """Wrench blocks cycling through three regimes: rest, press, press and push."""
    rows, regimes = [], []
    for b in range(n_blocks):
        regime = b % 3
        if regime == 0:
            f = rng.normal(0.0, 0.1, size=(block, 2))
        else:
            fz = rng.uniform(-12.0, -8.0, block)
            fx = rng.uniform(-1.0, 1.0, block) if regime == 1 else rng.uniform(8.0, 12.0, block)
            f = np.column_stack([fx, fz])
        rows.append(f)
        regimes.extend([regime] * block)
    return np.vstack(rows), np.array(regimes)


def random_model(rng, n_phases, m, d_w) -> HmmModel:
    d = d_w + 1
    dynamics = []
    for _ in range(n_phases):
        q = rng.normal(size=(m, m))
        dynamics.append(
            PhaseDynamics(
                A=rng.normal(0.0, 0.5, size=(m, m)),
                B=rng.normal(0.0, 0.5, size=(m, d)),
                Sigma=0.3 * q @ q.T + 0.2 * np.eye(m),
            )
        )
    weights = TransitionWeights(
        w0=rng.normal(size=(n_phases, d)), w=rng.normal(size=(n_phases, n_phases, d))
    )
    return HmmModel(dynamics=dynamics, weights=weights)


def random_demo(rng, T, m, d_w) -> Demonstration:
    return Demonstration.from_arrays(
        rng.normal(size=(T, m)), rng.normal(size=(T, d_w)), dt=0.01
    )


@pytest.fixture(autouse=True)
def reset_policy():
    """Make sure no ambient policy leaks between tests."""
    token = _current_policy.set(None)
    yield
    _current_policy.reset(token)


@pytest.fixture
def make_model():
    """Factory of random models: ``make_model(rng, n_phases, m, d_w)``."""
    return random_model


@pytest.fixture
def make_demo():
    """Factory of random demonstrations: ``make_demo(rng, T, m, d_w)``."""
    return random_demo


@pytest.fixture(scope="session")
def reference_model():
    return build_reference_model()


@pytest.fixture(scope="session")
def reference_data(reference_model):
    """1200 samples drawn from the reference model, with their true phases."""
    rng = np.random.default_rng(2024)
    wrenches, _ = regime_wrenches(rng)
    return sample_from_model(reference_model, wrenches, s0=[0.6, -0.8], seed=7)


@pytest.fixture(scope="session")
def valley_world():
    return ContactWorld(Scenario.VALLEY, noise_pos=1e-4, noise_force=0.05)


@pytest.fixture(scope="session")
def valley_demos(valley_world):
    """One demonstration from each side of the valley."""
    return [
        generate_demo(
            valley_world,
            valley_script(side),
            seed=k,
            start=default_start(Scenario.VALLEY, side),
            label=f"valley_{side}",
        )
        for k, side in enumerate(("left", "right"))
    ]
