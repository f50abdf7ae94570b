"""Model-order selection by a BIC sweep over candidate phase counts."""

from __future__ import annotations

import dataclasses
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .core import Demonstration, HmmModel, common_dims
from .exceptions import FitError, ValidationError
from .learning import EmConfig, EmReport, em_fit

logger = logging.getLogger(__name__)

COUNT_TRANSITIONS = "transitions"
COUNT_FULL = "full"


@dataclass(frozen=True)
class BicResult:
    n_phases: int
    loglik: float
    n_params: int
    n_obs: int
    bic: float


@dataclass(frozen=True)
class SkippedCandidate:
    n_phases: int
    reason: str


@dataclass(frozen=True)
class SweepResult:
    """
    Outcome of :func:`bic_sweep`.

    ``count_mode`` names the parameter count used: ``"transitions"`` counts only the
    initial and transition parameters, ``"full"`` adds the Gaussian emission
    parameters.
    """

    results: tuple[BicResult, ...]
    selected: int
    count_mode: str
    skipped: tuple[SkippedCandidate, ...] = ()

    def result_for(self, n_phases: int) -> BicResult:
        for result in self.results:
            if result.n_phases == n_phases:
                return result
        raise KeyError(n_phases)


def param_count(
    n_phases: int,
    full: bool = False,
    m: Optional[int] = None,
    d: Optional[int] = None,
) -> int:
    """
    Number of free parameters of an ``n_phases`` model.

    The default count is ``N^2 + 2N - 1``. With ``full=True`` each phase adds
    ``m^2 + m*d + m(m+1)/2`` for ``A``, ``B`` and the symmetric ``Sigma``.
    """
    if n_phases < 1:
        raise ValidationError("n_phases must be at least 1")
    count = n_phases * n_phases + 2 * n_phases - 1
    if full:
        if m is None or d is None:
            raise ValidationError("full parameter count needs m and d")
        count += n_phases * (m * m + m * d + m * (m + 1) // 2)
    return count


def bic(loglik: float, n_params: int, n_obs: int) -> float:
    """``-2 loglik + n_params ln(n_obs)``."""
    if n_obs < 1:
        raise ValidationError("n_obs must be positive")
    return -2.0 * loglik + n_params * math.log(n_obs)


def _fit_candidate(
    demos: Sequence[Demonstration], n_phases: int, config: EmConfig
) -> tuple[HmmModel, EmReport]:
    seeded = dataclasses.replace(config, seed=config.seed + n_phases)
    return em_fit(demos, n_phases, seeded)


def bic_sweep(
    demos: Sequence[Demonstration],
    n_min: int,
    n_max: int,
    config: EmConfig,
    *,
    full: bool = False,
    max_workers: Optional[int] = None,
) -> SweepResult:
    """
    Fit every ``N`` in ``n_min..n_max`` and select the one with the lowest BIC.

    Each candidate is fitted with seed ``config.seed + N``. ``T`` is the total
    number of samples over all demonstrations. Candidates whose fit fails are
    skipped with a warning; ties in BIC go to the smaller ``N``.

    Raises:
        ValidationError: If the range is empty or invalid.
        FitError: If every candidate failed.
    """
    if not 1 <= n_min <= n_max:
        raise ValidationError(f"invalid sweep range {n_min}..{n_max}")
    demos = list(demos)
    m, d_w = common_dims(demos)
    n_obs = sum(len(demo) for demo in demos)
    candidates = list(range(n_min, n_max + 1))

    def run(n_phases: int):
        try:
            return n_phases, _fit_candidate(demos, n_phases, config), None
        except FitError as exc:
            return n_phases, None, exc

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(run, candidates))
    else:
        outcomes = [run(n) for n in candidates]

    results: list[BicResult] = []
    skipped: list[SkippedCandidate] = []
    for n_phases, fitted, error in outcomes:
        if error is not None:
            logger.warning("Skipping N=%d: %s", n_phases, error)
            skipped.append(SkippedCandidate(n_phases, str(error)))
            continue
        _, report = fitted
        n_params = param_count(n_phases, full=full, m=m, d=d_w + 1)
        score = bic(report.best_loglik, n_params, n_obs)
        logger.info(
            "N=%d loglik=%.4f params=%d BIC=%.4f",
            n_phases,
            report.best_loglik,
            n_params,
            score,
        )
        results.append(BicResult(n_phases, report.best_loglik, n_params, n_obs, score))

    if not results:
        raise FitError(
            f"every candidate in {n_min}..{n_max} failed", n_phases=n_max
        )
    best = min(results, key=lambda r: (r.bic, r.n_phases))
    return SweepResult(
        results=tuple(results),
        selected=best.n_phases,
        count_mode=COUNT_FULL if full else COUNT_TRANSITIONS,
        skipped=tuple(skipped),
    )
