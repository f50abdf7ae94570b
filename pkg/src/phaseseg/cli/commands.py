"""
Command implementations.

Every command takes a :class:`RunConfig` (or explicit paths), writes its files
into ``config.out`` and returns a small summary dict that ``main`` prints as
JSON. Phases in files and summaries are 1-based.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..core import Demonstration
from ..exceptions import ConfigError, SchemaError
from ..inference import forward_backward
from ..learning import em_fit, segment
from ..selection import bic_sweep
from ..simulate import (
    LabeledDemo,
    Scenario,
    compare_feature_modes,
    default_script,
    default_start,
    extract_primitives,
    generate_demo,
    reproduce,
)
from .config import RunConfig
from .export import bic_frame, forward_frame, trace_frame, write_csv
from .ingest import (
    ingest,
    read_labels,
    truth_path,
    write_demo,
    write_labels,
)
from .persistence import load_model, report_to_dict, save_model, write_json

logger = logging.getLogger(__name__)


def _out_dir(config: RunConfig) -> Path:
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_demos(config: RunConfig) -> list[Demonstration]:
    if not config.demos:
        raise ConfigError("no demonstrations given (use --demos)")
    return [ingest(path) for path in config.demos]


def _step_times(demo: Demonstration) -> np.ndarray:
    return demo.times[:-1]


def _output_stems(demos: Sequence[Demonstration]) -> list[str]:
    """
    File stems for per-demonstration outputs. If two demonstrations share a
    stem every stem gets its position as a prefix, so no file overwrites
    another.
    """
    stems = [demo.label or "demo" for demo in demos]
    if len(set(stems)) == len(stems):
        return stems
    return [f"{k}_{stem}" for k, stem in enumerate(stems)]


def _write_segmentation(
    out: Path, model, demo: Demonstration, stem: str
) -> tuple[Path, Path]:
    posterior = forward_backward(model, demo)
    labels = segment(model, demo)
    labels_path = write_labels(out / f"{stem}_labels.csv", _step_times(demo), labels)
    forward_path = write_csv(
        out / f"{stem}_forward.csv", forward_frame(_step_times(demo), posterior.alpha)
    )
    return labels_path, forward_path


def cmd_generate(config: RunConfig) -> dict[str, Any]:
    """Scripted demonstrations with ground-truth sidecars."""
    out = _out_dir(config)
    world = config.contact_world()
    files = []
    for k in range(config.n_demos):
        side = "left" if k % 2 == 0 else "right"
        labeled = generate_demo(
            world,
            default_script(world.scenario, side),
            config.dt,
            seed=config.seed + k,
            start=default_start(world.scenario, side),
            controller=config.controller(),
            label=f"demo_{k}",
        )
        path = write_demo(out / f"demo_{k}.csv", labeled.demo)
        write_labels(truth_path(path), labeled.demo.times, labeled.labels)
        logger.info("Wrote %s (%d samples)", path, len(labeled.demo))
        files.append(str(path))
    return {"command": "generate", "world": world.scenario.value, "demos": files}


def cmd_train(config: RunConfig) -> dict[str, Any]:
    """Fit a model and segment every training demonstration."""
    if config.n_phases is None:
        raise ConfigError("train needs --n-phases")
    out = _out_dir(config)
    demos = _load_demos(config)
    model, report = em_fit(demos, config.n_phases, config.em_config())
    save_model(out / "model.json", model)
    write_json(out / "em_report.json", report_to_dict(report))
    for demo, stem in zip(demos, _output_stems(demos)):
        _write_segmentation(out, model, demo, stem)
    return {
        "command": "train",
        "n_phases": config.n_phases,
        "iterations": report.iterations_run,
        "converged": report.converged,
        "loglik": report.best_loglik,
    }


def cmd_select(config: RunConfig) -> dict[str, Any]:
    """BIC sweep over the configured range."""
    if config.sweep is None:
        raise ConfigError("select needs --sweep MIN..MAX")
    out = _out_dir(config)
    demos = _load_demos(config)
    sweep = bic_sweep(demos, *config.sweep, config.em_config(), full=config.full_bic)
    write_csv(out / "bic.csv", bic_frame(sweep))
    summary = {
        "command": "select",
        "selected": sweep.selected,
        "count_mode": sweep.count_mode,
        "skipped": [
            {"n_phases": s.n_phases, "reason": s.reason} for s in sweep.skipped
        ],
    }
    write_json(out / "selection.json", summary)
    return summary


def cmd_segment(model_path: str, demo_path: str, out: str) -> dict[str, Any]:
    """Label file and forward-probability file of one demonstration."""
    model = load_model(model_path)
    demo = ingest(demo_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels_path, forward_path = _write_segmentation(
        out_dir, model, demo, _output_stems([demo])[0]
    )
    return {
        "command": "segment",
        "labels": str(labels_path),
        "forward": str(forward_path),
    }


def cmd_reproduce(model_path: str, config: RunConfig) -> dict[str, Any]:
    """
    Closed-loop reproduction in the configured world. Primitives are extracted
    from the demonstrations given with ``--demos``.
    """
    model = load_model(model_path)
    demos = _load_demos(config)
    posteriors = [forward_backward(model, demo) for demo in demos]
    primitives = extract_primitives(model, demos, posteriors, config.controller())
    world = config.contact_world()
    start = (
        np.asarray(config.start)
        if config.start is not None
        else default_start(world.scenario)
    )
    trace = reproduce(
        model,
        primitives,
        world,
        start,
        config.dt,
        config.max_steps,
        seed=config.seed,
        dwell=config.dwell,
    )
    out = _out_dir(config)
    write_csv(out / "trace.csv", trace_frame(trace))
    summary = {
        "command": "reproduce",
        "world": world.scenario.value,
        "steps": len(trace),
        "terminated": trace.terminated,
        "phase_sequence": [p + 1 for p in trace.phase_sequence()],
        "switches": [
            {"t": t, "from": a + 1, "to": b + 1} for t, a, b in trace.switch_times()
        ],
        "final_x": trace.final_x.tolist(),
        "final_pose_error": world.goal_error(trace.final_x),
    }
    write_json(out / "summary.json", summary)
    return summary


def _labeled(config: RunConfig) -> list[LabeledDemo]:
    demos = _load_demos(config)
    labeled = []
    for path, demo in zip(config.demos, demos):
        sidecar = truth_path(path)
        if not sidecar.exists():
            raise SchemaError("ground-truth sidecar not found", path=str(sidecar))
        labeled.append(LabeledDemo(demo, read_labels(sidecar)))
    return labeled


def cmd_compare(config: RunConfig) -> dict[str, Any]:
    """Wrench features against the position-relative baseline."""
    out = _out_dir(config)
    report = compare_feature_modes(_labeled(config), config.em_config(), config.n_phases)
    payload = {"command": "compare", **report.as_dict()}
    write_json(out / "comparison.json", payload)
    return payload


def cmd_ingest(path: str, fmt: Optional[str] = None) -> dict[str, Any]:
    """Validate a demonstration file and describe it."""
    demo = ingest(path, fmt)
    return {
        "command": "ingest",
        "path": str(path),
        "T": len(demo),
        "m": demo.m,
        "d_w": demo.d_w,
        "dt": demo.dt,
    }


def scenario_names() -> list[str]:
    return [s.value for s in Scenario]
