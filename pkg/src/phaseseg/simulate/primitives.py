"""Per-phase controller primitives from segmented demonstrations."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from scipy.linalg import eigh

from ..core import Demonstration, HmmModel, PosteriorMarginals
from ..exceptions import ValidationError
from ..policy_context import get_active_policy
from .controller import ControllerDefaults, PhasePrimitive

logger = logging.getLogger(__name__)

# Speed given to phases that never move, so the primitive stays valid.
_MIN_SPEED = 1e-9


def principal_direction(
    displacements: np.ndarray, weights: np.ndarray, degenerate_gap: float
) -> np.ndarray:
    """
    Unit principal direction of weighted displacement vectors.

    The leading eigenvector of ``sum_t w_t d_t d_t^T`` is signed to agree with
    the weighted mean displacement. When the leading eigenvalues are within
    ``degenerate_gap`` of each other the mean displacement projected on their
    joint eigenspace is used instead.
    """
    m = displacements.shape[1]
    scatter = (displacements * weights[:, None]).T @ displacements
    mean = weights @ displacements
    eigvals, eigvecs = eigh(scatter)
    lead = eigvals[-1]
    if lead <= 0.0:
        norm = float(np.linalg.norm(mean))
        return mean / norm if norm > 0 else np.eye(m)[0]

    tied = eigvals >= (1.0 - degenerate_gap) * lead
    if m > 1 and tied.sum() > 1:
        basis = eigvecs[:, tied]
        projected = basis @ (basis.T @ mean)
        norm = float(np.linalg.norm(projected))
        if norm > 0:
            return projected / norm

    direction = eigvecs[:, -1]
    if direction @ mean < 0:
        direction = -direction
    return direction / np.linalg.norm(direction)


def extract_primitives(
    model: HmmModel,
    demos: Sequence[Demonstration],
    posteriors: Sequence[PosteriorMarginals],
    controller: ControllerDefaults = ControllerDefaults(),
) -> list[PhasePrimitive]:
    """
    One primitive per phase: responsibility-weighted principal direction of
    the step displacements, weighted mean speed and the configured gains.

    Phases with less than ``min_phase_mass`` samples of responsibility are
    returned with ``low_confidence`` set.
    """
    if len(demos) != len(posteriors):
        raise ValidationError("posteriors must align with demonstrations")
    if not demos:
        raise ValidationError("at least one demonstration is required")
    policy = get_active_policy()
    dt = demos[0].dt
    disp = np.vstack([np.diff(demo.states, axis=0) for demo in demos])
    gamma = np.vstack([post.gamma for post in posteriors])
    if gamma.shape != (disp.shape[0], model.n_phases):
        raise ValidationError(
            f"posteriors have shape {gamma.shape}, expected "
            f"({disp.shape[0]}, {model.n_phases})"
        )
    step_len = np.linalg.norm(disp, axis=1)
    stiffness = controller.stiffness(model.m)

    primitives = []
    for j in range(model.n_phases):
        w = gamma[:, j]
        mass = float(w.sum())
        low = mass < policy.min_phase_mass
        if low:
            logger.warning(
                "Phase %d has responsibility mass %.3g < %.3g; primitive is low-confidence",
                j,
                mass,
                policy.min_phase_mass,
            )
        direction = principal_direction(disp, w, policy.degenerate_gap)
        speed = float(w @ step_len) / (mass * dt) if mass > 0 else 0.0
        primitives.append(
            PhasePrimitive(
                v_dir=direction,
                speed=max(speed, _MIN_SPEED),
                stiffness=stiffness,
                damping=controller.damping_value,
                low_confidence=low,
            )
        )
    return primitives
