"""
Parameter estimation by expectation-maximization.

Notes:
    Demonstrations are concatenated for the M-step, but each keeps its own
    Markov chain: no pairwise posterior is ever formed across the junction of
    two demonstrations.

    The dynamics M-step is a weighted ridge regression of ``s_{t+1}`` on
    ``[s_t ; a_t]``. The ridge shrinks ``[A B]`` toward ``[I 0]`` and is scaled
    per column by the diagonal of ``X W X^T``, so directions the data does not
    excite (zero wrench in free space, a coordinate that never moves) default
    to "state persists, no force coupling" instead of collapsing to zero.

    The transition-weight M-step runs gradient descent on the weighted
    multi-class logistic loss. With ``line_search`` enabled (the default) each
    step halves lambda until the loss does not increase, which keeps EM
    monotone.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np
from scipy.linalg import LinAlgError, solve
from scipy.special import log_softmax, softmax
from sklearn.cluster import KMeans

from . import registry
from .core import (
    Demonstration,
    FeatureFn,
    HmmModel,
    PhaseDynamics,
    PosteriorMarginals,
    TransitionWeights,
    common_dims,
    ensure_valid,
    floor_covariance,
)
from .exceptions import (
    DivergenceError,
    FitError,
    NumericalError,
    PhaseSegError,
    ValidationError,
)
from .inference import forward_backward, forward_pass
from .policy_context import get_active_policy

logger = logging.getLogger(__name__)

# Consecutive loss increases tolerated in fixed-step mode
_DIVERGENCE_STEPS = 5
_MAX_HALVINGS = 40


@dataclass(frozen=True)
class EmConfig:
    """
    Settings for :func:`em_fit`.

    ``seed`` has no default: every fit must name its seed.
    """

    seed: int
    max_iters: int = 100
    loglik_tol: float = 1e-4
    lr_lambda: float = 1e-3
    lr_iters: int = 50
    ridge: float = 1e-8

    # Transition features
    feature_fn: Union[FeatureFn, str] = FeatureFn.IDENTITY

    # Initialisation
    sticky_bias: float = 2.0
    kmeans_n_init: int = 10

    # Inner logistic solver
    line_search: bool = True

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ValueError("seed must be an integer")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.loglik_tol <= 0:
            raise ValueError("loglik_tol must be positive")
        if self.lr_lambda <= 0:
            raise ValueError("lr_lambda must be positive")
        if self.lr_iters < 1:
            raise ValueError("lr_iters must be at least 1")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if self.kmeans_n_init < 1:
            raise ValueError("kmeans_n_init must be at least 1")


@dataclass(frozen=True)
class EmReport:
    """Outcome of one EM run."""

    loglik_trace: tuple[float, ...]
    iterations_run: int
    converged: bool
    n_phases: int
    best_iteration: int
    phase_order: tuple[int, ...] = field(default=())

    @property
    def best_loglik(self) -> float:
        return self.loglik_trace[self.best_iteration - 1]


# ---------------------------------------------------------------------------
# Data assembly


@dataclass(frozen=True, eq=False)
class _Design:
    """Regressors and targets of all demonstrations, stacked."""

    X: np.ndarray  # n×(m+d), rows [s_t, a_t]
    Y: np.ndarray  # n×m, rows s_{t+1}
    offsets: tuple[int, ...]  # start row of each demo
    m: int


def _design(demos: Sequence[Demonstration]) -> _Design:
    xs, ys, offsets = [], [], []
    row = 0
    for demo in demos:
        s = demo.states
        xs.append(np.hstack([s[:-1], demo.interactions[:-1]]))
        ys.append(s[1:])
        offsets.append(row)
        row += s.shape[0] - 1
    return _Design(np.vstack(xs), np.vstack(ys), tuple(offsets), demos[0].m)


def feature_params_for(
    feature_fn: Union[FeatureFn, str], demos: Sequence[Demonstration]
) -> dict[str, Any]:
    """Parameters a feature function needs, derived from training data."""
    if feature_fn == FeatureFn.RELATIVE_POSITION:
        finals = np.vstack([demo.states[-1] for demo in demos])
        return {"target": finals.mean(axis=0)}
    return {}


def _features(
    name: str, params: Mapping[str, Any], demos: Sequence[Demonstration]
) -> list[np.ndarray]:
    return [
        registry.apply(name, demo.states[:-1], demo.interactions[:-1], params)
        for demo in demos
    ]


# ---------------------------------------------------------------------------
# Dynamics


def fit_dynamics(
    X: np.ndarray,
    Y: np.ndarray,
    weights: np.ndarray,
    ridge: float,
    phase: Optional[int] = None,
) -> PhaseDynamics:
    """
    Weighted ridge least squares ``[A B] = (Y W X^T + Theta0 R)(X W X^T + R)^-1``.

    ``X`` holds regressor rows ``[s_t, a_t]``, ``Y`` the next states and
    ``weights`` the per-row responsibilities. ``R`` is diagonal with entries
    ``ridge * max(G_kk, tr(G)/p)`` and ``Theta0 = [I 0]``.

    Raises:
        NumericalError: If the regularised normal equations are singular.
    """
    m = Y.shape[1]
    p = X.shape[1]
    wx = X * weights[:, None]
    gram = X.T @ wx
    cross = Y.T @ wx
    if ridge > 0:
        diag = np.diag(gram)
        reg = ridge * np.maximum(diag, diag.mean())
        target = np.zeros((m, p))
        target[:, :m] = np.eye(m)
        gram = gram + np.diag(reg)
        cross = cross + target * reg
    try:
        theta = solve(gram, cross.T, assume_a="pos").T
    except LinAlgError as exc:
        label = "" if phase is None else f" for phase {phase}"
        raise NumericalError(
            f"weighted least squares{label} is singular; increase ridge",
            phase=phase,
        ) from exc
    if not np.all(np.isfinite(theta)):
        raise NumericalError(
            f"weighted least squares for phase {phase} produced non-finite values",
            phase=phase,
        )
    resid = Y - X @ theta.T
    sigma = (resid * weights[:, None]).T @ resid / float(np.sum(weights))
    return PhaseDynamics(A=theta[:, :m], B=theta[:, m:], Sigma=floor_covariance(sigma))


def _responsibilities(posteriors: Sequence[PosteriorMarginals], j: int) -> np.ndarray:
    return np.concatenate([post.gamma[:, j] for post in posteriors])


def m_step_dynamics(
    demos: Sequence[Demonstration],
    posteriors: Sequence[PosteriorMarginals],
    j: int,
    ridge: float,
    previous: Optional[PhaseDynamics] = None,
) -> PhaseDynamics:
    """
    Re-estimate ``(A_j, B_j, Sigma_j)`` from all demonstrations.

    A phase with negligible responsibility mass keeps ``previous``.

    Raises:
        NumericalError: If the system is singular, or the phase is empty and no
            previous dynamics are given.
    """
    if len(demos) != len(posteriors):
        raise ValidationError("posteriors must align with demonstrations")
    return _m_step_phase(_design(demos), posteriors, j, ridge, previous)


def _m_step_phase(
    design: _Design,
    posteriors: Sequence[PosteriorMarginals],
    j: int,
    ridge: float,
    previous: Optional[PhaseDynamics],
) -> PhaseDynamics:
    weights = _responsibilities(posteriors, j)
    mass = float(weights.sum())
    if mass < get_active_policy().negligible_mass:
        if previous is None:
            raise NumericalError(f"phase {j} has no responsibility mass", phase=j)
        logger.warning("Phase %d has negligible mass %.3g; keeping dynamics", j, mass)
        return previous
    return fit_dynamics(design.X, design.Y, weights, ridge, phase=j)


# ---------------------------------------------------------------------------
# Transition weights


def weights_loss(phi: np.ndarray, targets: np.ndarray, w_rows: np.ndarray) -> float:
    """
    Weighted multi-class logistic loss ``-sum_t sum_j L_tj log P_tj``.

    Args:
        phi: n×d_phi features.
        targets: n×N class weights L (rows may sum to less than one).
        w_rows: N×d_phi weights, one row per destination class.
    """
    log_p = log_softmax(phi @ w_rows.T, axis=1)
    return float(-np.sum(targets * log_p))


def weights_gradient(
    phi: np.ndarray, targets: np.ndarray, w_rows: np.ndarray
) -> np.ndarray:
    """
    Gradient of :func:`weights_loss`: ``G = (P * r - L)^T phi`` with
    ``r_t = sum_j L_tj``, which reduces to ``F (P - L)`` when targets are
    normalized.
    """
    p = softmax(phi @ w_rows.T, axis=1)
    occupancy = targets.sum(axis=1, keepdims=True)
    return (p * occupancy - targets).T @ phi


def _descend(
    phi: np.ndarray,
    targets: np.ndarray,
    w_rows: np.ndarray,
    lr_lambda: float,
    lr_iters: int,
    line_search: bool,
    phase: Optional[int],
) -> np.ndarray:
    w = w_rows.copy()
    loss = weights_loss(phi, targets, w)
    step = lr_lambda
    increases = 0
    for _ in range(lr_iters):
        grad = weights_gradient(phi, targets, w)
        if not line_search:
            w = w - lr_lambda * grad
            new_loss = weights_loss(phi, targets, w)
            increases = increases + 1 if new_loss > loss else 0
            loss = new_loss
            if increases >= _DIVERGENCE_STEPS:
                source = "initial" if phase is None else f"source phase {phase}"
                raise DivergenceError(
                    f"logistic loss of {source} increased {_DIVERGENCE_STEPS} "
                    f"consecutive steps; use a smaller lr_lambda than {lr_lambda:g}",
                    phase=phase,
                    lr_lambda=lr_lambda,
                )
            continue

        trial = step
        for _ in range(_MAX_HALVINGS):
            candidate = w - trial * grad
            cand_loss = weights_loss(phi, targets, candidate)
            if cand_loss <= loss:
                w, loss = candidate, cand_loss
                break
            trial *= 0.5
        else:
            break  # no descent left at machine precision
        step = min(lr_lambda, 2.0 * trial)
    return w


def m_step_weights(
    demos: Sequence[Demonstration],
    posteriors: Sequence[PosteriorMarginals],
    weights_old: TransitionWeights,
    lr_lambda: float,
    lr_iters: int,
    *,
    feature_fn: Union[FeatureFn, str] = FeatureFn.IDENTITY,
    feature_params: Optional[Mapping[str, Any]] = None,
    line_search: bool = True,
) -> TransitionWeights:
    """
    Gradient-descent update of the initial and transition weights.

    For source phase i the samples are the transitions ``rho_t -> rho_{t+1}``
    of every demonstration, with features of sample ``t+1`` and class weights
    ``zeta_t(i, .)``; ``w0`` uses the first sample of each demonstration with
    class weights ``gamma_0``.

    Raises:
        DivergenceError: In fixed-step mode, when the loss increases
            5 consecutive steps.
    """
    if len(demos) != len(posteriors):
        raise ValidationError("posteriors must align with demonstrations")
    name = getattr(feature_fn, "value", feature_fn)
    feats = _features(name, feature_params or {}, demos)
    return _m_step_weights(feats, posteriors, weights_old, lr_lambda, lr_iters, line_search)


def _m_step_weights(
    feats: Sequence[np.ndarray],
    posteriors: Sequence[PosteriorMarginals],
    weights_old: TransitionWeights,
    lr_lambda: float,
    lr_iters: int,
    line_search: bool,
) -> TransitionWeights:
    n_phases = weights_old.n_phases
    if n_phases == 1:
        return weights_old

    phi0 = np.vstack([f[0] for f in feats])
    gamma0 = np.vstack([post.gamma[0] for post in posteriors])
    w0 = _descend(phi0, gamma0, weights_old.w0, lr_lambda, lr_iters, line_search, None)

    phi_next = np.vstack([f[1:] for f in feats])
    w = np.empty_like(weights_old.w)
    for i in range(n_phases):
        targets = np.vstack([post.zeta[:, i, :] for post in posteriors])
        w[i] = _descend(
            phi_next, targets, weights_old.w[i], lr_lambda, lr_iters, line_search, i
        )
    return TransitionWeights(w0=w0, w=w)


# ---------------------------------------------------------------------------
# Initialisation


def kmeans_init(
    demos: Sequence[Demonstration],
    n_phases: int,
    seed: int,
    *,
    feature_fn: Union[FeatureFn, str] = FeatureFn.IDENTITY,
    ridge: float = 1e-8,
    sticky_bias: float = 2.0,
    n_init: int = 10,
) -> HmmModel:
    """
    Initial model from k-means clusters of the per-sample transition features.

    Each cluster gets dynamics fitted by least squares on its own samples and
    the transition weights start at zero, plus ``sticky_bias`` on the bias
    component of every ``w[i][i]``.

    Raises:
        ValidationError: If ``n_phases`` exceeds the number of distinct feature
            vectors.
    """
    if n_phases < 1:
        raise ValidationError("n_phases must be at least 1")
    for demo in demos:
        ensure_valid(demo)
    common_dims(demos)

    params = feature_params_for(feature_fn, demos)
    name = getattr(feature_fn, "value", feature_fn)
    phi = np.vstack(_features(name, params, demos))
    distinct = np.unique(phi, axis=0).shape[0]
    if n_phases > distinct:
        raise ValidationError(
            f"n_phases={n_phases} exceeds the {distinct} distinct feature vectors"
        )

    labels = np.zeros(phi.shape[0], dtype=int)
    if n_phases > 1:
        # cluster in sorted row order so the result ignores demo order
        order = np.lexsort(phi.T[::-1])
        labels[order] = KMeans(
            n_clusters=n_phases, n_init=n_init, random_state=seed
        ).fit_predict(phi[order])

    design = _design(demos)
    dynamics = [
        fit_dynamics(design.X, design.Y, (labels == j).astype(float), ridge, phase=j)
        for j in range(n_phases)
    ]
    weights = TransitionWeights.zeros(n_phases, phi.shape[1], sticky_bias)
    return HmmModel(
        dynamics=tuple(dynamics),
        weights=weights,
        feature_fn=feature_fn,
        feature_params=params,
    )


# ---------------------------------------------------------------------------
# EM


def e_step(
    model: HmmModel, demos: Sequence[Demonstration]
) -> list[PosteriorMarginals]:
    """Posteriors of every demonstration, in input order."""
    return [forward_backward(model, demo) for demo in demos]


def permute_model(model: HmmModel, order: Sequence[int]) -> HmmModel:
    """
    Relabel phases: new phase ``k`` is old phase ``order[k]``.

    The data likelihood is unchanged.
    """
    order = [int(o) for o in order]
    if sorted(order) != list(range(model.n_phases)):
        raise ValidationError(f"{order} is not a permutation of the phases")
    w = model.weights
    weights = TransitionWeights(w0=w.w0[order], w=w.w[np.ix_(order, order)])
    return model.with_parameters(
        dynamics=[model.dynamics[o] for o in order], weights=weights
    )


def first_dominance_order(gamma: np.ndarray) -> list[int]:
    """Phases in order of first appearance of their argmax; unseen ones last."""
    order: list[int] = []
    for label in np.argmax(gamma, axis=1):
        if int(label) not in order:
            order.append(int(label))
    order.extend(j for j in range(gamma.shape[1]) if j not in order)
    return order


def _m_step(
    model: HmmModel,
    design: _Design,
    feats: Sequence[np.ndarray],
    posteriors: Sequence[PosteriorMarginals],
    config: EmConfig,
) -> HmmModel:
    dynamics = [
        _m_step_phase(design, posteriors, j, config.ridge, model.dynamics[j])
        for j in range(model.n_phases)
    ]
    weights = _m_step_weights(
        feats,
        posteriors,
        model.weights,
        config.lr_lambda,
        config.lr_iters,
        config.line_search,
    )
    return model.with_parameters(dynamics=dynamics, weights=weights)


def em_fit(
    demos: Sequence[Demonstration], n_phases: int, config: EmConfig
) -> tuple[HmmModel, EmReport]:
    """
    Fit an ``n_phases`` model by EM from a k-means initialisation.

    Iterates until the log-likelihood improves by less than
    ``config.loglik_tol`` or ``config.max_iters`` E-steps have run, and returns
    the best model seen with phases renumbered by first dominance in the first
    demonstration.

    Raises:
        FitError: Wrapping any failure, with the iteration it happened in.
    """
    demos = list(demos)
    try:
        model = kmeans_init(
            demos,
            n_phases,
            config.seed,
            feature_fn=config.feature_fn,
            ridge=config.ridge,
            sticky_bias=config.sticky_bias,
            n_init=config.kmeans_n_init,
        )
    except PhaseSegError as exc:
        raise FitError(
            f"initialisation failed: {exc}", iteration=0, n_phases=n_phases
        ) from exc

    design = _design(demos)
    feats = _features(model.feature_name, model.feature_params, demos)

    trace: list[float] = []
    best_model, best_posteriors, best_iter = model, None, 0
    converged = False
    for iteration in range(1, config.max_iters + 1):
        try:
            posteriors = e_step(model, demos)
        except PhaseSegError as exc:
            raise FitError(
                f"E-step failed at iteration {iteration}: {exc}",
                iteration=iteration,
                n_phases=n_phases,
            ) from exc

        loglik = float(sum(post.loglik for post in posteriors))
        trace.append(loglik)
        improvement = loglik - trace[-2] if len(trace) > 1 else float("inf")
        logger.debug(
            "EM N=%d iteration %d loglik %.6f improvement %.3g",
            n_phases,
            iteration,
            loglik,
            improvement,
        )
        if best_posteriors is None or loglik > trace[best_iter - 1]:
            best_model, best_posteriors, best_iter = model, posteriors, iteration

        if improvement < config.loglik_tol:
            converged = True
            break
        if iteration == config.max_iters:
            break

        try:
            model = _m_step(model, design, feats, posteriors, config)
        except DivergenceError as exc:
            exc.iteration, exc.n_phases = iteration, n_phases
            raise
        except PhaseSegError as exc:
            raise FitError(
                f"M-step failed at iteration {iteration}: {exc}",
                iteration=iteration,
                n_phases=n_phases,
            ) from exc

    order = first_dominance_order(best_posteriors[0].gamma)
    fitted = permute_model(best_model, order)
    report = EmReport(
        loglik_trace=tuple(trace),
        iterations_run=len(trace),
        converged=converged,
        n_phases=n_phases,
        best_iteration=best_iter,
        phase_order=tuple(order),
    )
    logger.info(
        "EM N=%d finished after %d iterations (converged=%s, loglik=%.6f)",
        n_phases,
        report.iterations_run,
        converged,
        report.best_loglik,
    )
    return fitted, report


def segment(model: HmmModel, demo: Demonstration) -> np.ndarray:
    """Per-step phase labels: argmax of the normalized forward messages."""
    msg = forward_pass(model, demo)
    return np.argmax(msg.log_alpha, axis=1)
