"""
Demonstration files.

CSV files are header driven: ``t, x, y, z`` then optionally ``rx, ry, rz``,
then ``fx, fy, fz`` and optionally ``tx, ty, tz``. Units are metres, radians,
newtons and newton-metres. JSONL files hold one object per sample with keys
``t``, ``s`` (state list) and ``a`` (wrench list).

Ground-truth labels live in a sidecar ``<stem>_truth.csv`` with columns
``t, phase`` (1-based).
"""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from ..core import Demonstration, ensure_valid
from ..exceptions import SchemaError

POSITION = ["x", "y", "z"]
ROTATION = ["rx", "ry", "rz"]
FORCE = ["fx", "fy", "fz"]
TORQUE = ["tx", "ty", "tz"]


class DataFormat(str, Enum):
    CSV = "csv"
    JSONL = "jsonl"


def _columns(header: list[str], path: str) -> tuple[list[str], list[str]]:
    required = ["t", *POSITION, *FORCE]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"missing columns: {', '.join(missing)}", path=path)
    state_cols, wrench_cols = list(POSITION), list(FORCE)
    for group, target in ((ROTATION, state_cols), (TORQUE, wrench_cols)):
        present = [c for c in group if c in header]
        if present and len(present) != len(group):
            raise SchemaError(
                f"columns {', '.join(group)} must appear together", path=path
            )
        target.extend(present)
    unknown = sorted(set(header) - {"t", *state_cols, *wrench_cols})
    if unknown:
        raise SchemaError(f"unknown columns: {', '.join(unknown)}", path=path)
    return state_cols, wrench_cols


def _infer_dt(times: np.ndarray) -> float:
    if times.size < 2:
        return 1.0
    return float(np.median(np.diff(times)))


def read_csv(path: Union[str, Path], dt: Optional[float] = None) -> Demonstration:
    """
    Raises:
        SchemaError: On a bad header or a missing or non-numeric value; the
            error names the 1-based data row.
    """
    path = str(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as exc:
        raise SchemaError("file is empty", path=path) from exc
    frame.columns = [c.strip() for c in frame.columns]
    state_cols, wrench_cols = _columns(list(frame.columns), path)

    numeric = {}
    for col in ["t", *state_cols, *wrench_cols]:
        raw = frame[col].str.strip()
        values = pd.to_numeric(raw, errors="coerce")
        bad = np.flatnonzero(values.isna().to_numpy() & (raw.str.lower() != "nan"))
        if bad.size:
            row = int(bad[0]) + 1
            what = "missing" if raw.iloc[bad[0]] == "" else "non-numeric"
            raise SchemaError(f"{what} value for '{col}' at row {row}", path=path, row=row)
        # float() rounds correctly, so written values read back bit-exact
        numeric[col] = raw.astype(float).to_numpy()

    times = numeric["t"]
    demo = Demonstration.from_arrays(
        np.column_stack([numeric[c] for c in state_cols]),
        np.column_stack([numeric[c] for c in wrench_cols]),
        dt if dt is not None else _infer_dt(times),
        label=Path(path).stem,
        times=times,
    )
    return ensure_valid(demo)


def read_jsonl(path: Union[str, Path], dt: Optional[float] = None) -> Demonstration:
    path = str(path)
    times, states, wrenches = [], [], []
    with open(path, encoding="utf-8") as fh:
        for row, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                t = float(record["t"])
                s = [float(v) for v in record["s"]]
                a = [float(v) for v in record["a"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"bad record at row {row}: {exc}", path=path, row=row) from exc
            if states and (len(s) != len(states[0]) or len(a) != len(wrenches[0])):
                raise SchemaError(f"inconsistent lengths at row {row}", path=path, row=row)
            times.append(t)
            states.append(s)
            wrenches.append(a)
    if not times:
        raise SchemaError("file has no records", path=path)
    t_arr = np.asarray(times)
    demo = Demonstration.from_arrays(
        np.asarray(states),
        np.asarray(wrenches),
        dt if dt is not None else _infer_dt(t_arr),
        label=Path(path).stem,
        times=t_arr,
    )
    return ensure_valid(demo)


def ingest(
    path: Union[str, Path],
    fmt: Optional[Union[DataFormat, str]] = None,
    dt: Optional[float] = None,
) -> Demonstration:
    """
    Read and validate a demonstration; the format defaults to the file suffix.

    Raises:
        SchemaError: If the file does not match its format.
        ValidationError: If the samples violate a demonstration invariant.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError("file not found", path=str(path))
    fmt = DataFormat(fmt) if fmt is not None else _format_for(path)
    if fmt is DataFormat.JSONL:
        return read_jsonl(path, dt)
    return read_csv(path, dt)


def _format_for(path: Path) -> DataFormat:
    suffix = path.suffix.lower().lstrip(".")
    if suffix in ("jsonl", "ndjson"):
        return DataFormat.JSONL
    return DataFormat.CSV


def demo_columns(m: int, d_w: int) -> tuple[list[str], list[str]]:
    """Column names for an ``m``-D state and ``d_w``-D wrench."""
    if m not in (3, 6) or d_w not in (3, 6):
        raise SchemaError(f"no CSV schema for m={m}, d_w={d_w}")
    state = POSITION + (ROTATION if m == 6 else [])
    wrench = FORCE + (TORQUE if d_w == 6 else [])
    return state, wrench


def write_demo(path: Union[str, Path], demo: Demonstration) -> Path:
    """Write a demonstration as CSV at full float precision."""
    state_cols, wrench_cols = demo_columns(demo.m, demo.d_w)
    frame = pd.DataFrame(demo.states, columns=state_cols)
    frame.insert(0, "t", demo.times)
    frame[wrench_cols] = demo.wrenches
    path = Path(path)
    frame.to_csv(path, index=False)
    return path


def truth_path(demo_path: Union[str, Path]) -> Path:
    demo_path = Path(demo_path)
    return demo_path.with_name(f"{demo_path.stem}_truth.csv")


def write_labels(path: Union[str, Path], times: np.ndarray, labels: np.ndarray) -> Path:
    """Write 0-based labels as a ``t, phase`` CSV with 1-based phases."""
    frame = pd.DataFrame({"t": times, "phase": np.asarray(labels, dtype=int) + 1})
    path = Path(path)
    frame.to_csv(path, index=False)
    return path


def read_labels(path: Union[str, Path]) -> np.ndarray:
    """Read a ``t, phase`` CSV back into 0-based labels."""
    path = str(path)
    frame = pd.read_csv(path)
    if "phase" not in frame.columns:
        raise SchemaError("label file needs a 'phase' column", path=path)
    if frame["phase"].isna().any():
        row = int(np.flatnonzero(frame["phase"].isna().to_numpy())[0]) + 1
        raise SchemaError(f"missing phase at row {row}", path=path, row=row)
    return frame["phase"].to_numpy(dtype=int) - 1
