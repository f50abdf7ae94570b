"""``phaseseg`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections.abc import Sequence
from typing import Any, Optional

from ..exceptions import ConfigError, PhaseSegError
from .commands import (
    cmd_compare,
    cmd_generate,
    cmd_ingest,
    cmd_reproduce,
    cmd_segment,
    cmd_select,
    cmd_train,
    scenario_names,
)
from .config import build_config, load_config_file, parse_sweep

logger = logging.getLogger(__name__)

LOG_ENV = "PHASESEG_LOG"
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def configure_logging() -> None:
    level_name = os.environ.get(LOG_ENV, "WARNING").upper()
    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def _sweep(text: str) -> tuple[int, int]:
    try:
        return parse_sweep(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file of run settings")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int)


def _fitting(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--demos", nargs="+", help="demonstration files")
    parser.add_argument("--feature", choices=["wrench", "state"])
    parser.add_argument("--max-iters", dest="max_iters", type=int)
    parser.add_argument("--lr", type=float, help="logistic step size lambda")
    parser.add_argument("--ridge", type=float)


def _world(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--world", choices=scenario_names())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phaseseg",
        description="Segment, select, and reproduce contact-rich demonstrations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate scripted demonstrations")
    _common(p)
    _world(p)
    p.add_argument("--n-demos", dest="n_demos", type=int)

    p = sub.add_parser("train", help="fit a model with EM")
    _common(p)
    _fitting(p)
    p.add_argument("--n-phases", dest="n_phases", type=int)

    p = sub.add_parser("select", help="choose the number of phases by BIC")
    _common(p)
    _fitting(p)
    p.add_argument("--sweep", type=_sweep, metavar="MIN..MAX")
    p.add_argument("--full-bic", dest="full_bic", action="store_true", default=None)

    p = sub.add_parser("segment", help="label a demonstration with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--demo", required=True)
    p.add_argument("--out", default=".")

    p = sub.add_parser("reproduce", help="run the model in closed loop")
    _common(p)
    _world(p)
    p.add_argument("--model")
    p.add_argument("--demos", nargs="+", help="demonstrations to extract primitives from")
    p.add_argument("--start", type=_floats, help="start pose, comma separated")
    p.add_argument("--dwell", type=float)
    p.add_argument("--max-steps", dest="max_steps", type=int)

    p = sub.add_parser("compare", help="wrench versus position transition features")
    _common(p)
    _fitting(p)
    p.add_argument("--n-phases", dest="n_phases", type=int)

    p = sub.add_parser("ingest", help="validate a demonstration file")
    p.add_argument("path")
    p.add_argument("--format", dest="fmt", choices=["csv", "jsonl"])
    return parser


_CONFIG_KEYS = (
    "out",
    "seed",
    "demos",
    "feature",
    "max_iters",
    "lr",
    "ridge",
    "world",
    "n_demos",
    "n_phases",
    "sweep",
    "full_bic",
    "model",
    "start",
    "dwell",
    "max_steps",
)


def _run(args: argparse.Namespace) -> dict[str, Any]:
    if args.command == "segment":
        return cmd_segment(args.model, args.demo, args.out)
    if args.command == "ingest":
        return cmd_ingest(args.path, args.fmt)

    file_values = load_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if hasattr(args, k)}
    try:
        config = build_config(file_values, overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    if args.command == "generate":
        return cmd_generate(config)
    if args.command == "train":
        return cmd_train(config)
    if args.command == "select":
        return cmd_select(config)
    if args.command == "reproduce":
        if config.model is None:
            raise ConfigError("reproduce needs --model")
        return cmd_reproduce(config.model, config)
    return cmd_compare(config)


def error_record(exc: PhaseSegError, command: Optional[str]) -> dict[str, Any]:
    record: dict[str, Any] = {
        "error": type(exc).__name__,
        "message": str(exc),
        "command": command,
    }
    record.update(exc.context())
    return record


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        summary = _run(args)
    except PhaseSegError as exc:
        logger.debug("Command %s failed", args.command, exc_info=True)
        sys.stderr.write(json.dumps(error_record(exc, args.command), sort_keys=True) + "\n")
        return 1
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return 0
