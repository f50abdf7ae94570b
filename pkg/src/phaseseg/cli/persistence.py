"""
Model files.

A model file is self-describing JSON: dimensions, the feature function id and
its parameters, per-phase matrices as row-major nested lists and the
transition weights. Floats are written with ``repr`` so a save/load round trip
is bit-exact.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Any, Union

import numpy as np

from ..core import HmmModel, PhaseDynamics, TransitionWeights
from ..exceptions import PhaseSegError, SchemaError
from ..learning import EmReport

FORMAT_VERSION = 1
PHASE_ORDER = "first_dominance"


def _to_json(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def model_to_dict(model: HmmModel) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "n_phases": model.n_phases,
        "m": model.m,
        "d": model.d,
        "feature_fn": model.feature_name,
        "feature_params": {k: _to_json(v) for k, v in model.feature_params.items()},
        "phase_order": PHASE_ORDER,
        "phases": [
            {"A": dyn.A.tolist(), "B": dyn.B.tolist(), "Sigma": dyn.Sigma.tolist()}
            for dyn in model.dynamics
        ],
        "weights": {
            "w0": model.weights.w0.tolist(),
            "w": model.weights.w.tolist(),
        },
    }


def model_from_dict(data: dict[str, Any], path: str = "") -> HmmModel:
    """
    Raises:
        SchemaError: If keys are missing, the version is unknown or the
            parameters do not form a consistent model.
    """
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported model format version {version!r}", path=path)
    try:
        dynamics = [
            PhaseDynamics(
                A=np.array(p["A"], dtype=float),
                B=np.array(p["B"], dtype=float),
                Sigma=np.array(p["Sigma"], dtype=float),
            )
            for p in data["phases"]
        ]
        weights = TransitionWeights(
            w0=np.array(data["weights"]["w0"], dtype=float),
            w=np.array(data["weights"]["w"], dtype=float),
        )
        model = HmmModel(
            dynamics=dynamics,
            weights=weights,
            feature_fn=data["feature_fn"],
            feature_params=data.get("feature_params", {}),
        )
    except KeyError as exc:
        raise SchemaError(f"model file is missing {exc}", path=path) from exc
    except PhaseSegError as exc:
        raise SchemaError(f"model file is inconsistent: {exc}", path=path) from exc
    if (model.n_phases, model.m, model.d) != (data.get("n_phases"), data.get("m"), data.get("d")):
        raise SchemaError("model dimensions do not match the stored header", path=path)
    return model


def write_json(path: Union[str, Path], payload: Any) -> Path:
    """Deterministic JSON: sorted keys, ``repr`` floats, trailing newline."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, default=_to_json)
        fh.write("\n")
    return path


def save_model(path: Union[str, Path], model: HmmModel) -> Path:
    return write_json(path, model_to_dict(model))


def load_model(path: Union[str, Path]) -> HmmModel:
    path = str(path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise SchemaError("model file not found", path=path) from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file is not valid JSON: {exc}", path=path) from exc
    if not isinstance(data, dict):
        raise SchemaError("model file must hold a JSON object", path=path)
    return model_from_dict(data, path)


def report_to_dict(report: EmReport) -> dict[str, Any]:
    data = dataclasses.asdict(report)
    data["loglik_trace"] = list(report.loglik_trace)
    data["phase_order"] = list(report.phase_order)
    data["best_loglik"] = report.best_loglik
    return data
