"""
Domain types for phase segmentation.

All types are immutable value objects: arrays are copied and marked read-only
at construction, so models and demonstrations can be shared freely between
threads. Array-holding types compare by identity (``eq=False``); compare their
arrays explicitly.

Indexing is 0-based throughout the Python API. A demonstration of ``T`` points
yields ``K = T - 1`` emissions, so posteriors are indexed by the phases
``rho_0 .. rho_{K-1}``.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from types import MappingProxyType
from typing import Any, Optional, Union

import numpy as np
from numpy.typing import ArrayLike

from . import registry
from .exceptions import ValidationError
from .policy_context import get_active_policy
from .utils import as_matrix, as_vector, frozen

# A wrench concatenated with the constant 1.
InteractionVector = np.ndarray


class FeatureFn(str, Enum):
    """Built-in transition-feature functions."""

    IDENTITY = "identity"
    RELATIVE_POSITION = "relative_position"


@registry.feature_fn(FeatureFn.IDENTITY.value)
def _identity_features(
    states: np.ndarray, interactions: np.ndarray, params: Mapping[str, Any]
) -> np.ndarray:
    return interactions


@registry.feature_fn(FeatureFn.RELATIVE_POSITION.value)
def _relative_position_features(
    states: np.ndarray, interactions: np.ndarray, params: Mapping[str, Any]
) -> np.ndarray:
    target = np.asarray(params.get("target", np.zeros(states.shape[1])), dtype=float)
    return np.hstack([states - target, np.ones((states.shape[0], 1))])


def feature(a_raw: ArrayLike) -> InteractionVector:
    """
    Build the interaction vector ``[a_raw ; 1]`` from a measured wrench.

    Raises:
        ValidationError: If the wrench is not a finite vector.
    """
    return np.append(as_vector(a_raw, "wrench"), 1.0)


def floor_covariance(sigma: ArrayLike) -> np.ndarray:
    """Symmetrize ``sigma`` and clamp its eigenvalues at the policy's sigma_floor."""
    floor = get_active_policy().sigma_floor
    arr = np.asarray(sigma, dtype=float)
    sym = 0.5 * (arr + arr.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    clamped = (eigvecs * np.maximum(eigvals, floor)) @ eigvecs.T
    return 0.5 * (clamped + clamped.T)


@dataclass(frozen=True, eq=False)
class TrajectoryPoint:
    """One sample: time, state and the raw measured wrench."""

    t: float
    s: np.ndarray
    a_raw: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        a_raw = np.asarray(self.a_raw, dtype=float)
        if s.ndim != 1 or a_raw.ndim != 1:
            raise ValidationError("state and wrench must be vectors")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "s", frozen(s))
        object.__setattr__(self, "a_raw", frozen(a_raw))


@dataclass(frozen=True, eq=False)
class Demonstration:
    """
    An ordered sequence of samples taken every ``dt`` seconds.

    Construction does not enforce the sample invariants so that malformed
    recordings can be inspected; :func:`validate_demo` lists the violations and
    every inference entry point calls :func:`ensure_valid`.
    """

    points: tuple[TrajectoryPoint, ...]
    dt: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def from_arrays(
        cls,
        states: ArrayLike,
        wrenches: ArrayLike,
        dt: float,
        label: str = "",
        times: Optional[ArrayLike] = None,
    ) -> Demonstration:
        """Build a demonstration from T×m states and T×d_w wrenches."""
        s = np.asarray(states, dtype=float)
        w = np.asarray(wrenches, dtype=float)
        if s.ndim != 2 or w.ndim != 2 or s.shape[0] != w.shape[0]:
            raise ValidationError(
                f"states {s.shape} and wrenches {w.shape} must be 2-D with equal rows"
            )
        t = (
            np.arange(s.shape[0], dtype=float) * float(dt)
            if times is None
            else np.asarray(times, dtype=float)
        )
        points = tuple(TrajectoryPoint(t[k], s[k], w[k]) for k in range(s.shape[0]))
        return cls(points=points, dt=dt, label=label)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def m(self) -> int:
        return int(self.points[0].s.shape[0])

    @property
    def d_w(self) -> int:
        return int(self.points[0].a_raw.shape[0])

    @cached_property
    def times(self) -> np.ndarray:
        return frozen(np.array([p.t for p in self.points]))

    @cached_property
    def states(self) -> np.ndarray:
        return frozen(np.vstack([p.s for p in self.points]))

    @cached_property
    def wrenches(self) -> np.ndarray:
        return frozen(np.vstack([p.a_raw for p in self.points]))

    @cached_property
    def interactions(self) -> np.ndarray:
        w = self.wrenches
        return frozen(np.hstack([w, np.ones((w.shape[0], 1))]))


def validate_demo(demo: Demonstration) -> list[str]:
    """
    List every violated demonstration invariant, with sample indices.

    Returns:
        An empty list when the demonstration is well formed.
    """
    violations: list[str] = []
    points = demo.points
    if len(points) < 2:
        violations.append(f"too short: T={len(points)}, need at least 2")
    if not (np.isfinite(demo.dt) and demo.dt > 0):
        violations.append(f"invalid sample period dt={demo.dt}")
    if not points:
        return violations

    m = points[0].s.shape[0]
    d_w = points[0].a_raw.shape[0]
    tol = get_active_policy().dt_tolerance
    for k, p in enumerate(points):
        if p.s.shape[0] != m:
            violations.append(f"state length {p.s.shape[0]} != {m} at index {k}")
        if p.a_raw.shape[0] != d_w:
            violations.append(f"wrench length {p.a_raw.shape[0]} != {d_w} at index {k}")
        if not (
            np.isfinite(p.t) and np.all(np.isfinite(p.s)) and np.all(np.isfinite(p.a_raw))
        ):
            violations.append(f"non-finite at index {k}")
        if k > 0 and demo.dt > 0:
            step = p.t - points[k - 1].t
            if not step > 0:
                violations.append(f"timestamp not increasing at index {k}")
            elif abs(step - demo.dt) > tol * demo.dt:
                violations.append(
                    f"timestamp spacing {step:.6g} outside dt={demo.dt:.6g} "
                    f"± {tol:.0%} at index {k}"
                )
    return violations


def ensure_valid(demo: Demonstration) -> Demonstration:
    """Return ``demo`` unchanged or raise ValidationError listing its violations."""
    violations = validate_demo(demo)
    if violations:
        name = f" '{demo.label}'" if demo.label else ""
        raise ValidationError(f"Invalid demonstration{name}", violations)
    return demo


@dataclass(frozen=True, eq=False)
class PhaseDynamics:
    """Linear Gaussian dynamics of one phase: s' ~ N(A s + B a, Sigma)."""

    A: np.ndarray
    B: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        m = A.shape[0]
        if A.shape != (m, m):
            raise ValidationError(f"A must be square, got {A.shape}")
        B = as_matrix(self.B, "B")
        if B.shape[0] != m:
            raise ValidationError(f"B must have {m} rows, got {B.shape}")
        Sigma = as_matrix(self.Sigma, "Sigma", (m, m))
        if not np.allclose(Sigma, Sigma.T, rtol=1e-10, atol=1e-15):
            raise ValidationError("Sigma must be symmetric")
        floor = get_active_policy().sigma_floor
        min_eig = float(np.linalg.eigvalsh(0.5 * (Sigma + Sigma.T)).min())
        if min_eig < floor * (1.0 - 1e-6):
            raise ValidationError(
                f"Sigma must be positive definite with eigenvalues >= {floor:g}, "
                f"smallest is {min_eig:g}"
            )
        object.__setattr__(self, "A", frozen(A))
        object.__setattr__(self, "B", frozen(B))
        object.__setattr__(self, "Sigma", frozen(Sigma))

    @property
    def m(self) -> int:
        return int(self.A.shape[0])

    @property
    def d(self) -> int:
        return int(self.B.shape[1])


@dataclass(frozen=True, eq=False)
class TransitionWeights:
    """Softmax weights: ``w0[j]`` for the initial phase, ``w[i][j]`` for i -> j."""

    w0: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        w0 = as_matrix(self.w0, "w0")
        w = np.asarray(self.w, dtype=float)
        n, dim = w0.shape
        if w.shape != (n, n, dim):
            raise ValidationError(f"w must have shape {(n, n, dim)}, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValidationError("w contains non-finite values")
        object.__setattr__(self, "w0", frozen(w0))
        object.__setattr__(self, "w", frozen(w))

    @classmethod
    def zeros(cls, n_phases: int, dim: int, sticky_bias: float = 0.0) -> TransitionWeights:
        """Zero weights plus ``sticky_bias`` on the bias component of each w[i][i]."""
        w = np.zeros((n_phases, n_phases, dim))
        w[np.arange(n_phases), np.arange(n_phases), -1] = sticky_bias
        return cls(w0=np.zeros((n_phases, dim)), w=w)

    @property
    def n_phases(self) -> int:
        return int(self.w0.shape[0])

    @property
    def dim(self) -> int:
        return int(self.w0.shape[1])


def _feature_id(value: Union[FeatureFn, str]) -> Union[FeatureFn, str]:
    try:
        return FeatureFn(value)
    except ValueError:
        if not registry.is_registered(str(value)):
            raise ValidationError(f"Unknown feature function '{value}'") from None
        return str(value)


def _freeze_params(params: Mapping[str, Any]) -> Mapping[str, Any]:
    out: dict[str, Any] = {}
    for key, value in params.items():
        if isinstance(value, (list, tuple, np.ndarray)):
            out[key] = frozen(np.asarray(value, dtype=float))
        else:
            out[key] = value
    return MappingProxyType(out)


@dataclass(frozen=True, eq=False)
class HmmModel:
    """
    Non-homogeneous autoregressive HMM.

    ``feature_params`` holds the arguments of the transition-feature function,
    e.g. the ``target`` position of :attr:`FeatureFn.RELATIVE_POSITION`.
    """

    dynamics: tuple[PhaseDynamics, ...]
    weights: TransitionWeights
    feature_fn: Union[FeatureFn, str] = FeatureFn.IDENTITY
    feature_params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        dynamics = tuple(self.dynamics)
        object.__setattr__(self, "dynamics", dynamics)
        object.__setattr__(self, "feature_fn", _feature_id(self.feature_fn))
        object.__setattr__(self, "feature_params", _freeze_params(self.feature_params))

        problems: list[str] = []
        if not dynamics:
            problems.append("at least one phase is required")
        else:
            m, d = dynamics[0].m, dynamics[0].d
            for j, dyn in enumerate(dynamics):
                if (dyn.m, dyn.d) != (m, d):
                    problems.append(
                        f"phase {j} has (m, d) = ({dyn.m}, {dyn.d}), expected ({m}, {d})"
                    )
            if self.weights.n_phases != len(dynamics):
                problems.append(
                    f"weights cover {self.weights.n_phases} phases, "
                    f"dynamics cover {len(dynamics)}"
                )
            if not problems:
                sample = registry.apply(
                    self.feature_name,
                    np.zeros((1, m)),
                    np.append(np.zeros(d - 1), 1.0)[None, :],
                    self.feature_params,
                )
                if sample.shape[1] != self.weights.dim:
                    problems.append(
                        f"weights have feature dimension {self.weights.dim}, "
                        f"'{self.feature_name}' produces {sample.shape[1]}"
                    )
        if problems:
            raise ValidationError("Inconsistent HmmModel", problems)

    @property
    def feature_name(self) -> str:
        """Registry name of the transition-feature function."""
        return getattr(self.feature_fn, "value", self.feature_fn)

    @property
    def n_phases(self) -> int:
        return len(self.dynamics)

    @property
    def m(self) -> int:
        return self.dynamics[0].m

    @property
    def d(self) -> int:
        return self.dynamics[0].d

    def phi(self, states: np.ndarray, interactions: np.ndarray) -> np.ndarray:
        """Transition features for a block of (state, interaction) rows."""
        return transition_features(self, states, interactions)

    def with_parameters(
        self,
        dynamics: Optional[Iterable[PhaseDynamics]] = None,
        weights: Optional[TransitionWeights] = None,
    ) -> HmmModel:
        """Return a copy with replaced dynamics and/or weights."""
        return dataclasses.replace(
            self,
            dynamics=tuple(dynamics) if dynamics is not None else self.dynamics,
            weights=weights if weights is not None else self.weights,
            feature_params=dict(self.feature_params),
        )


def transition_features(
    model: HmmModel, states: ArrayLike, interactions: ArrayLike
) -> np.ndarray:
    """Apply the model's feature function to K×m states and K×d interactions."""
    s = np.atleast_2d(np.asarray(states, dtype=float))
    a = np.atleast_2d(np.asarray(interactions, dtype=float))
    return registry.apply(model.feature_name, s, a, model.feature_params)


@dataclass(frozen=True, eq=False)
class PosteriorMarginals:
    """
    Smoothed posteriors of one demonstration.

    ``gamma`` is K×N, ``zeta`` is (K-1)×N×N and ``alpha`` holds the normalized
    forward probabilities (K×N) that online filtering would report.
    """

    gamma: np.ndarray
    zeta: np.ndarray
    loglik: float
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gamma", frozen(self.gamma))
        object.__setattr__(self, "zeta", frozen(self.zeta))
        object.__setattr__(self, "alpha", frozen(self.alpha))
        object.__setattr__(self, "loglik", float(self.loglik))


def common_dims(demos: Sequence[Demonstration]) -> tuple[int, int]:
    """Check that all demos share (m, d_w) and return them."""
    if not demos:
        raise ValidationError("at least one demonstration is required")
    dims = {(d.m, d.d_w) for d in demos}
    if len(dims) != 1:
        raise ValidationError(f"demonstrations disagree on (m, d_w): {sorted(dims)}")
    return next(iter(dims))
