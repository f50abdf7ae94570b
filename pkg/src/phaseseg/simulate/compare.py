"""Wrench-driven versus position-driven transitions on the same data."""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import FeatureFn
from ..exceptions import ValidationError
from ..inference import count_switches, segmentation_accuracy
from ..learning import EmConfig, em_fit, segment
from .generate import LabeledDemo

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModeReport:
    feature_fn: str
    accuracy: float
    switches: int
    true_switches: int
    spurious_switches: int
    loglik: float


@dataclass(frozen=True)
class ComparisonReport:
    n_phases: int
    wrench: ModeReport
    state: ModeReport

    def as_dict(self) -> dict:
        return {
            "n_phases": self.n_phases,
            "wrench": dataclasses.asdict(self.wrench),
            "state": dataclasses.asdict(self.state),
        }


def _evaluate(
    demos: Sequence[LabeledDemo], n_phases: int, config: EmConfig, mode: FeatureFn
) -> ModeReport:
    model, report = em_fit(
        [d.demo for d in demos], n_phases, dataclasses.replace(config, feature_fn=mode)
    )
    preds, truths = [], []
    switches = true_switches = spurious = 0
    for d in demos:
        pred = segment(model, d.demo)
        truth = d.step_labels
        preds.append(pred)
        truths.append(truth)
        sw, true_sw = count_switches(pred), count_switches(truth)
        switches += sw
        true_switches += true_sw
        spurious += max(0, sw - true_sw)
    accuracy = segmentation_accuracy(np.concatenate(preds), np.concatenate(truths))
    logger.info(
        "%s features: accuracy %.3f, %d switches (%d spurious)",
        mode.value,
        accuracy,
        switches,
        spurious,
    )
    return ModeReport(
        feature_fn=mode.value,
        accuracy=accuracy,
        switches=switches,
        true_switches=true_switches,
        spurious_switches=spurious,
        loglik=report.best_loglik,
    )


def compare_feature_modes(
    demos: Sequence[LabeledDemo],
    config: EmConfig,
    n_phases: Optional[int] = None,
) -> ComparisonReport:
    """
    Fit the same data with wrench features and with the position-relative
    baseline, and score both against the ground-truth labels.

    ``n_phases`` defaults to the number of distinct ground-truth labels.
    """
    if not demos:
        raise ValidationError("at least one demonstration is required")
    if n_phases is None:
        n_phases = int(np.unique(np.concatenate([d.labels for d in demos])).size)
    return ComparisonReport(
        n_phases=n_phases,
        wrench=_evaluate(demos, n_phases, config, FeatureFn.IDENTITY),
        state=_evaluate(demos, n_phases, config, FeatureFn.RELATIVE_POSITION),
    )
