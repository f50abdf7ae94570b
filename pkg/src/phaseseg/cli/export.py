"""Tidy (long-format) CSV exports: one ``t, series, value`` row per number."""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from ..selection import SweepResult
from ..simulate import ReproductionTrace


def tidy(times: np.ndarray, columns: dict[str, np.ndarray]) -> pd.DataFrame:
    """Stack named per-time series into ``t, series, value`` rows, time-major."""
    wide = pd.DataFrame(columns)
    wide.insert(0, "t", times)
    long = wide.melt(id_vars="t", var_name="series", value_name="value")
    order = {name: i for i, name in enumerate(columns)}
    long["_order"] = long["series"].map(order)
    long = long.sort_values(["t", "_order"], kind="stable").drop(columns="_order")
    return long.reset_index(drop=True)


def forward_frame(times: np.ndarray, alpha: np.ndarray) -> pd.DataFrame:
    """Normalized forward probabilities, series ``phase_1 .. phase_N``."""
    return tidy(times, {f"phase_{j + 1}": alpha[:, j] for j in range(alpha.shape[1])})


def trace_frame(trace: ReproductionTrace) -> pd.DataFrame:
    """Setpoint, position, wrench and 1-based phase of every step."""
    x_star = np.vstack([s.x_star for s in trace.steps])
    x = trace.positions
    wrench = trace.wrenches
    columns: dict[str, np.ndarray] = {}
    for name, block in (("x_star", x_star), ("x", x), ("wrench", wrench)):
        for k in range(block.shape[1]):
            columns[f"{name}_{k + 1}"] = block[:, k]
    columns["phase"] = trace.phases + 1
    columns["primitive"] = np.array([s.primitive for s in trace.steps]) + 1
    return tidy(trace.times, columns)


def bic_frame(sweep: SweepResult) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "n_phases": [r.n_phases for r in sweep.results],
            "loglik": [r.loglik for r in sweep.results],
            "n_params": [r.n_params for r in sweep.results],
            "n_obs": [r.n_obs for r in sweep.results],
            "bic": [r.bic for r in sweep.results],
        }
    )


def write_csv(path: Union[str, Path], frame: pd.DataFrame) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False)
    return path
