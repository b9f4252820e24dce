"""Command-line entry point.

    wcsee-lab <mode> [--config FILE] [--seeds 1,2,3] [--out DIR]
              [--sweep axis=v1,v2,...]

Modes: train-sac, train-ddpg, sca-benchmark, eval, sweep.  The config file
uses a flat key=value format; a missing or empty file runs the documented
defaults.  WCSEE_THREADS caps the worker pool for seed/sweep fan-out.
"""

from __future__ import annotations

import argparse
import sys

from .config import (
    MODES,
    SWEEP_AXES,
    ExperimentSpec,
    ParseError,
    ValidationError,
    load_config,
)
from .runners import execute
from .sca.power import InfeasibleBlockError


def parse_seeds(raw: str) -> list[int]:
    try:
        seeds = [int(part) for part in raw.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"--seeds expects integers, got {raw!r}") from exc
    if not seeds:
        raise ValidationError("--seeds must list at least one seed")
    return seeds


def parse_sweep(raw: str):
    axis, _, values = raw.partition("=")
    axis = axis.strip()
    if axis not in SWEEP_AXES:
        raise ValidationError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    try:
        parsed = [float(v) for v in values.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"sweep values must be numbers, got {values!r}") from exc
    if not parsed:
        raise ValidationError("sweep needs at least one value")
    return axis, parsed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wcsee-lab",
        description="Secure UAV-RIS downlink lab: training, benchmark, sweeps.",
    )
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--seeds", default="0", help="comma-separated seed list")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--sweep", default=None, help="axis=v1,v2,... sweep points")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_config(args.config) if args.config else ExperimentSpec()
        seeds = parse_seeds(args.seeds)
        sweep = parse_sweep(args.sweep) if args.sweep else None
        rows = execute(args.mode, spec, seeds, args.out, sweep=sweep)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleBlockError as exc:
        print(f"benchmark infeasible: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    summary = ", ".join(
        f"{r[0]}[{r[1]}={r[2]}] mean={r[4]:.6g}" for r in rows if r[3] == "mean"
    )
    print(f"done: {summary}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
