"""
Exact inference for the non-homogeneous autoregressive HMM.

Emission ``t`` couples the phase ``rho_t`` to the step ``s_t -> s_{t+1}``
driven by the interaction vector ``a_t``; a demonstration of ``T`` points has
``K = T - 1`` emissions. The transition into ``rho_t`` is a softmax of the
transition features of sample ``t``; the initial phase uses the features of
sample 0.

All message passing runs in log space with per-step normalization. The
forward messages are therefore the normalized forward probabilities, which is
also what the online filter carries, and the log-likelihood is the sum of the
per-step log normalizers.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import LinAlgError, cho_factor, solve_triangular
from scipy.optimize import linear_sum_assignment
from scipy.special import log_softmax, logsumexp, softmax

from .core import (
    Demonstration,
    HmmModel,
    PosteriorMarginals,
    TransitionWeights,
    ensure_valid,
)
from .exceptions import NumericalError, ValidationError
from .utils import as_vector, frozen

logger = logging.getLogger(__name__)

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class ForwardState:
    """
    Online filter state after observing the step that ends at sample ``t + 1``.

    ``log_alpha`` is normalized (its exponentials sum to one) and ``loglik``
    accumulates the log normalizers, i.e. the log-likelihood seen so far.
    """

    log_alpha: np.ndarray
    t: int
    phase_estimate: int
    loglik: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "log_alpha", frozen(self.log_alpha))


# ---------------------------------------------------------------------------
# Emissions


def _gaussian_logpdf(resid: np.ndarray, sigma: np.ndarray, phase: int) -> np.ndarray:
    """Row-wise log N(resid; 0, sigma) for a K×m residual block."""
    try:
        chol, _ = cho_factor(sigma, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NumericalError(
            f"Sigma of phase {phase} is not positive definite", phase=phase
        ) from exc
    m = sigma.shape[0]
    z = solve_triangular(chol, resid.T, lower=True, check_finite=False)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (m * _LOG_2PI + logdet + np.sum(z * z, axis=0))


def _emission_block(
    model: HmmModel, states: np.ndarray, interactions: np.ndarray, nxt: np.ndarray
) -> np.ndarray:
    """K×N emission log-likelihoods for K (s_t, a_t, s_{t+1}) rows."""
    out = np.empty((states.shape[0], model.n_phases))
    for j, dyn in enumerate(model.dynamics):
        resid = nxt - states @ dyn.A.T - interactions @ dyn.B.T
        out[:, j] = _gaussian_logpdf(resid, dyn.Sigma, j)
    return out


def _check_dims(model: HmmModel, m: int, d: int) -> None:
    if (m, d) != (model.m, model.d):
        raise ValidationError(
            f"data dimensions (m={m}, d={d}) do not match the model "
            f"(m={model.m}, d={model.d})"
        )


def emission_loglik(
    model: HmmModel, j: int, s_t: ArrayLike, a_t: ArrayLike, s_next: ArrayLike
) -> float:
    """
    Log density of ``s_next`` under phase ``j``: N(A_j s_t + B_j a_t, Sigma_j).

    Raises:
        NumericalError: If Sigma_j is not positive definite.
    """
    if not 0 <= j < model.n_phases:
        raise ValidationError(f"phase index {j} outside [0, {model.n_phases})")
    s = as_vector(s_t, "s_t", model.m)
    a = as_vector(a_t, "a_t", model.d)
    nxt = as_vector(s_next, "s_next", model.m)
    dyn = model.dynamics[j]
    resid = nxt - dyn.A @ s - dyn.B @ a
    return float(_gaussian_logpdf(resid[None, :], dyn.Sigma, j)[0])


def emission_logliks(model: HmmModel, demo: Demonstration) -> np.ndarray:
    """K×N matrix of emission log-likelihoods for every step of ``demo``."""
    _check_dims(model, demo.m, demo.d_w + 1)
    s = demo.states
    return _emission_block(model, s[:-1], demo.interactions[:-1], s[1:])


# ---------------------------------------------------------------------------
# Transitions


def transition_matrix(weights: TransitionWeights, phi_t: ArrayLike) -> np.ndarray:
    """
    Row-stochastic N×N matrix; row i is softmax_j(w[i][j] · phi_t).

    ``phi_t`` is the transition feature vector; with the identity feature
    function it is the interaction vector a_t itself.
    """
    phi = as_vector(phi_t, "phi_t", weights.dim)
    return softmax(weights.w @ phi, axis=1)


def initial_distribution(weights: TransitionWeights, phi_1: ArrayLike) -> np.ndarray:
    """Initial phase distribution softmax_j(w0[j] · phi_1)."""
    phi = as_vector(phi_1, "phi_1", weights.dim)
    return softmax(weights.w0 @ phi)


def log_transition_matrices(weights: TransitionWeights, phi: np.ndarray) -> np.ndarray:
    """Stacked log transition matrices for a K×d_phi block of features."""
    logits = np.einsum("ijd,kd->kij", weights.w, phi)
    return log_softmax(logits, axis=2)


def log_initial_distribution(weights: TransitionWeights, phi_1: np.ndarray) -> np.ndarray:
    return log_softmax(weights.w0 @ phi_1)


# ---------------------------------------------------------------------------
# Smoothing


@dataclass(frozen=True, eq=False)
class _Messages:
    log_e: np.ndarray  # K×N emissions
    log_pi: np.ndarray  # N
    log_p: np.ndarray  # (K-1)×N×N, log_p[t] is rho_t -> rho_{t+1}
    log_alpha: np.ndarray  # K×N, normalized
    log_c: np.ndarray  # K normalizers


def _forward(log_e: np.ndarray, log_pi: np.ndarray, log_p: np.ndarray):
    n_steps, _ = log_e.shape
    log_alpha = np.empty_like(log_e)
    log_c = np.empty(n_steps)
    la = log_pi + log_e[0]
    log_c[0] = logsumexp(la)
    log_alpha[0] = la - log_c[0]
    for t in range(1, n_steps):
        la = log_e[t] + logsumexp(log_alpha[t - 1][:, None] + log_p[t - 1], axis=0)
        log_c[t] = logsumexp(la)
        log_alpha[t] = la - log_c[t]
    return log_alpha, log_c


def forward_pass(model: HmmModel, demo: Demonstration) -> _Messages:
    """Normalized forward messages of ``demo`` plus the terms they were built from."""
    ensure_valid(demo)
    log_e = emission_logliks(model, demo)
    phi = model.phi(demo.states[:-1], demo.interactions[:-1])
    log_pi = log_initial_distribution(model.weights, phi[0])
    log_p = log_transition_matrices(model.weights, phi[1:])
    log_alpha, log_c = _forward(log_e, log_pi, log_p)
    return _Messages(log_e, log_pi, log_p, log_alpha, log_c)


def forward_backward(model: HmmModel, demo: Demonstration) -> PosteriorMarginals:
    """
    Smoothed phase posteriors and log-likelihood of one demonstration.

    Returns:
        PosteriorMarginals with ``gamma`` (K×N), ``zeta`` ((K-1)×N×N),
        ``alpha`` (K×N normalized forward probabilities) and
        ``loglik = log p(s_1..s_{T-1} | s_0, a_0..a_{T-2})``.
    """
    msg = forward_pass(model, demo)
    n_steps, n_phases = msg.log_e.shape

    log_beta = np.zeros((n_steps, n_phases))
    for t in range(n_steps - 2, -1, -1):
        log_beta[t] = (
            logsumexp(
                msg.log_p[t] + (msg.log_e[t + 1] + log_beta[t + 1])[None, :], axis=1
            )
            - msg.log_c[t + 1]
        )

    log_gamma = msg.log_alpha + log_beta
    gamma = np.exp(log_gamma - logsumexp(log_gamma, axis=1, keepdims=True))
    gamma /= gamma.sum(axis=1, keepdims=True)

    if n_steps > 1:
        log_zeta = (
            msg.log_alpha[:-1, :, None]
            + msg.log_p
            + (msg.log_e[1:] + log_beta[1:])[:, None, :]
        )
        norm = logsumexp(log_zeta, axis=(1, 2), keepdims=True)
        zeta = np.exp(log_zeta - norm)
        zeta /= zeta.sum(axis=(1, 2), keepdims=True)
    else:
        zeta = np.zeros((0, n_phases, n_phases))

    return PosteriorMarginals(
        gamma=gamma,
        zeta=zeta,
        loglik=float(np.sum(msg.log_c)),
        alpha=np.exp(msg.log_alpha),
    )


# ---------------------------------------------------------------------------
# Online filtering


def _argmax(log_alpha: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. the lowest phase index on ties
    return int(np.argmax(log_alpha))


def filter_init(
    model: HmmModel, s_1: ArrayLike, a_1: ArrayLike, s_2: ArrayLike
) -> ForwardState:
    """Start online filtering from the first observed step ``s_1 -> s_2``."""
    s = as_vector(s_1, "s_1", model.m)
    a = as_vector(a_1, "a_1", model.d)
    nxt = as_vector(s_2, "s_2", model.m)
    log_e = _emission_block(model, s[None, :], a[None, :], nxt[None, :])[0]
    phi = model.phi(s[None, :], a[None, :])[0]
    la = log_e + log_initial_distribution(model.weights, phi)
    log_c = float(logsumexp(la))
    la = la - log_c
    return ForwardState(log_alpha=la, t=0, phase_estimate=_argmax(la), loglik=log_c)


def filter_step(
    state: ForwardState,
    model: HmmModel,
    s_t: ArrayLike,
    a_t: ArrayLike,
    s_next: ArrayLike,
) -> ForwardState:
    """Advance the online filter by one observed step ``s_t -> s_next``."""
    if state.log_alpha.shape != (model.n_phases,):
        raise ValidationError(
            f"filter state has {state.log_alpha.shape[0]} phases, "
            f"model has {model.n_phases}"
        )
    s = as_vector(s_t, "s_t", model.m)
    a = as_vector(a_t, "a_t", model.d)
    nxt = as_vector(s_next, "s_next", model.m)
    log_e = _emission_block(model, s[None, :], a[None, :], nxt[None, :])[0]
    phi = model.phi(s[None, :], a[None, :])
    log_p = log_transition_matrices(model.weights, phi)[0]
    la = log_e + logsumexp(state.log_alpha[:, None] + log_p, axis=0)
    log_c = float(logsumexp(la))
    la = la - log_c
    return ForwardState(
        log_alpha=la,
        t=state.t + 1,
        phase_estimate=_argmax(la),
        loglik=state.loglik + log_c,
    )


# ---------------------------------------------------------------------------
# Metrics


def predict_states(model: HmmModel, j: int, demo: Demonstration) -> np.ndarray:
    """One-step predictions ``A_j s_t + B_j a_t`` for t = 0..T-2, as (T-1)×m."""
    if not 0 <= j < model.n_phases:
        raise ValidationError(f"phase index {j} outside [0, {model.n_phases})")
    _check_dims(model, demo.m, demo.d_w + 1)
    dyn = model.dynamics[j]
    return demo.states[:-1] @ dyn.A.T + demo.interactions[:-1] @ dyn.B.T


def error_variance(predicted: ArrayLike, actual: ArrayLike) -> float:
    """
    Average squared prediction error per step.

    ``predicted`` and ``actual`` are the ``T - 1`` predicted and observed next
    states ``s_2 .. s_T`` of a segment of ``T >= 2`` samples, row for row; the
    result is ``sum_t |pred_t - actual_t|^2 / (T - 1)``.
    """
    pred = np.atleast_2d(np.asarray(predicted, dtype=float))
    act = np.atleast_2d(np.asarray(actual, dtype=float))
    if pred.shape != act.shape:
        raise ValidationError(
            f"predicted {pred.shape} and actual {act.shape} lengths differ"
        )
    if pred.shape[0] < 1:
        raise ValidationError("at least one step is required")
    return float(np.sum((pred - act) ** 2) / pred.shape[0])


def cross_phase_error_variance(
    model: HmmModel, segments: Sequence[Demonstration]
) -> np.ndarray:
    """
    N×N table ``E[j, i]``: error variance on the segment of phase j when
    predicting with the dynamics of phase i.
    """
    if len(segments) != model.n_phases:
        raise ValidationError(
            f"need one segment per phase ({model.n_phases}), got {len(segments)}"
        )
    table = np.empty((model.n_phases, model.n_phases))
    for j, segment in enumerate(segments):
        if len(segment) < 2:
            raise ValidationError(
                f"segment {j} has {len(segment)} sample; at least 2 are required"
            )
        actual = segment.states[1:]
        for i in range(model.n_phases):
            table[j, i] = error_variance(predict_states(model, i, segment), actual)
    return table


def count_switches(labels: ArrayLike) -> int:
    """Number of positions where consecutive labels differ."""
    arr = np.asarray(labels)
    if arr.size < 2:
        return 0
    return int(np.count_nonzero(arr[1:] != arr[:-1]))


def segmentation_accuracy(predicted: ArrayLike, truth: ArrayLike) -> float:
    """
    Fraction of samples labelled correctly under the best one-to-one mapping
    between predicted and true labels.
    """
    pred = np.asarray(predicted, dtype=int)
    true = np.asarray(truth, dtype=int)
    if pred.shape != true.shape:
        raise ValidationError(
            f"predicted {pred.shape} and true {true.shape} labels differ in length"
        )
    if pred.size == 0:
        return 1.0
    p_vals, p_idx = np.unique(pred, return_inverse=True)
    t_vals, t_idx = np.unique(true, return_inverse=True)
    confusion = np.zeros((p_vals.size, t_vals.size))
    np.add.at(confusion, (p_idx, t_idx), 1.0)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return float(confusion[rows, cols].sum() / pred.size)
