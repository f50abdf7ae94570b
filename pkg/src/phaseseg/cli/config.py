"""Run configuration: an optional JSON file overridden by command-line flags."""

from __future__ import annotations

import dataclasses
import json
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from ..core import FeatureFn
from ..exceptions import SchemaError
from ..learning import EmConfig
from ..simulate import ContactWorld, ControllerDefaults, Scenario, WorldGeometry

FEATURE_MODES = {"wrench": FeatureFn.IDENTITY, "state": FeatureFn.RELATIVE_POSITION}


def parse_sweep(text: str) -> tuple[int, int]:
    """Parse ``MIN..MAX`` into a pair of ints."""
    lo, sep, hi = str(text).partition("..")
    try:
        if not sep:
            raise ValueError
        return int(lo), int(hi)
    except ValueError:
        raise ValueError(f"sweep must look like MIN..MAX, got {text!r}") from None


@dataclass(frozen=True)
class RunConfig:
    """
    Everything one CLI invocation needs.

    ``n_phases`` and ``sweep`` are mutually exclusive.
    """

    demos: tuple[str, ...] = ()
    out: str = "."
    seed: int = 0

    # Model order
    n_phases: Optional[int] = None
    sweep: Optional[tuple[int, int]] = None
    full_bic: bool = False

    # EM
    feature: str = "wrench"
    max_iters: int = 100
    loglik_tol: float = 1e-4
    lr: float = 1e-3
    lr_iters: int = 50
    ridge: float = 1e-8

    # World
    world: str = "valley"
    dt: float = 0.01
    n_demos: int = 2
    plate_angle_deg: float = 45.0
    stiffness_env: float = 1e4
    friction_mu: float = 0.2
    noise_pos: float = 5e-5
    noise_force: float = 0.05

    # Controller
    stiffness_trans: float = 500.0
    stiffness_rot: float = 10.0
    damping: Optional[float] = None

    # Reproduction
    model: Optional[str] = None
    start: Optional[tuple[float, ...]] = None
    dwell: float = 0.5
    max_steps: int = 3000

    def __post_init__(self):
        object.__setattr__(self, "demos", tuple(str(p) for p in self.demos))
        if self.sweep is not None:
            sweep = self.sweep
            if isinstance(sweep, str):
                sweep = parse_sweep(sweep)
            lo, hi = (int(v) for v in sweep)
            if not 1 <= lo <= hi:
                raise ValueError(f"invalid sweep range {lo}..{hi}")
            object.__setattr__(self, "sweep", (lo, hi))
        if self.n_phases is not None and self.sweep is not None:
            raise ValueError("give either n_phases or sweep, not both")
        if self.n_phases is not None and self.n_phases < 1:
            raise ValueError("n_phases must be at least 1")
        if self.feature not in FEATURE_MODES:
            raise ValueError(f"feature must be one of {sorted(FEATURE_MODES)}")
        Scenario(self.world)
        if self.start is not None:
            object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_demos < 1:
            raise ValueError("n_demos must be at least 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.dwell < 0:
            raise ValueError("dwell must be non-negative")
        # derived settings check their own fields
        self.em_config()
        self.contact_world()
        self.controller()

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def feature_fn(self) -> FeatureFn:
        return FEATURE_MODES[self.feature]

    def em_config(self) -> EmConfig:
        return EmConfig(
            seed=self.seed,
            max_iters=self.max_iters,
            loglik_tol=self.loglik_tol,
            lr_lambda=self.lr,
            lr_iters=self.lr_iters,
            ridge=self.ridge,
            feature_fn=self.feature_fn,
        )

    def contact_world(self) -> ContactWorld:
        return ContactWorld(
            scenario=Scenario(self.world),
            geometry=WorldGeometry(plate_angle_deg=self.plate_angle_deg),
            stiffness_env=self.stiffness_env,
            friction_mu=self.friction_mu,
            noise_force=self.noise_force,
            noise_pos=self.noise_pos,
        )

    def controller(self) -> ControllerDefaults:
        return ControllerDefaults(self.stiffness_trans, self.stiffness_rot, self.damping)


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def load_config_file(path: str) -> dict[str, Any]:
    """
    Read a JSON object of RunConfig fields.

    Raises:
        SchemaError: If the file cannot be read, is not a JSON object or names
            unknown fields.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config is not valid JSON: {exc}", path=path) from exc
    except OSError as exc:
        raise SchemaError(f"cannot read config: {exc.strerror}", path=path) from exc
    if not isinstance(data, dict):
        raise SchemaError("config must be a JSON object", path=path)
    unknown = sorted(set(data) - _FIELDS)
    if unknown:
        raise SchemaError(f"unknown config fields: {', '.join(unknown)}", path=path)
    return data


def build_config(
    file_values: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Merge config-file values with explicit overrides (``None`` means unset).

    A flag giving ``n_phases`` replaces a file's ``sweep`` and vice versa.
    """
    values = dict(file_values or {})
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "n_phases":
            values.pop("sweep", None)
        elif key == "sweep":
            values.pop("n_phases", None)
        values[key] = value
    for key in ("sweep", "start"):
        if isinstance(values.get(key), list):
            values[key] = tuple(values[key])
    return RunConfig(**values)
