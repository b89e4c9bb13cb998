"""Command-line front end: one subcommand per run kind, plus replay.

Each run subcommand has a built-in demonstration config, so
``ergomax simulate --out run`` works with no config file; ``--config``
loads a TOML config and the remaining flags override its scalar fields.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from ..dynamics import DEFAULT_JITTER_SCALE
from ..errors import ErgomaxError, ReplayMismatch
from .config import (AnalysisConfig, ExperimentConfig, MapConfig, ModelConfig,
                     ObservableConfig, ScheduleConfig, SequenceSpecConfig,
                     TargetConfig, from_toml)
from .runner import RUN_KINDS_HELP, replay, run

_JITTERED_TENT = MapConfig(id="tent", jitter=DEFAULT_JITTER_SCALE)
_POINT_TARGET = TargetConfig(mode="explicit", point=(0.3,))
_RATIO_BANDS = AnalysisConfig(
    ratio_u=SequenceSpecConfig(kind="plain_log"),
    band_lower=SequenceSpecConfig(kind="log_minus_loglog", beta=3.0),
    band_upper=SequenceSpecConfig(kind="log_plus_loglog", eta=2.0),
    band_n_min=1000,
)


def default_config(kind: str) -> ExperimentConfig:
    """Built-in demonstration config for each run kind."""
    if kind == "simulate":
        return ExperimentConfig(
            kind="simulate", n_orbits=8, n_max=100000, out_dir="run-simulate",
            map=_JITTERED_TENT, target=_POINT_TARGET, analysis=_RATIO_BANDS)
    if kind == "bc":
        return ExperimentConfig(
            kind="bc", n_orbits=24, n_max=100000, out_dir="run-bc",
            map=_JITTERED_TENT, target=_POINT_TARGET,
            schedule=ScheduleConfig(rule="log_power", beta=3.0))
    if kind == "dim":
        return ExperimentConfig(
            kind="dim", n_orbits=4, n_max=250000, out_dir="run-dim",
            map=MapConfig(id="henon"), target=TargetConfig(mode="auto"))
    if kind == "decay":
        return ExperimentConfig(
            kind="decay", n_max=300000, out_dir="run-decay",
            map=MapConfig(id="intermittent", params={"alpha": 0.5}),
            target=_POINT_TARGET,
            analysis=AnalysisConfig(decay_pair="laminar"))
    if kind == "iid":
        return ExperimentConfig(
            kind="iid", n_orbits=8, n_max=1000000, out_dir="run-iid",
            model=ModelConfig(kind="exponential"), analysis=_RATIO_BANDS)
    if kind == "classify":
        return ExperimentConfig(
            kind="classify", n_max=1000000, out_dir="run-classify",
            model=ModelConfig(kind="exponential"),
            analysis=AnalysisConfig(
                ratio_u=SequenceSpecConfig(kind="log_plus_loglog", eta=2.0)))
    raise ValueError(f"no default config for {kind!r}")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML config file")
    p.add_argument("--seed", type=int, help="base RNG seed")
    p.add_argument("--orbits", type=int, help="ensemble size")
    p.add_argument("--n-max", type=int, help="orbit length / horizon")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int,
                   help="thread count (default: ERGOMAX_WORKERS or CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergomax",
        description="Extreme-value and hitting-statistics experiments "
                    "on chaotic maps.")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind, blurb in RUN_KINDS_HELP.items():
        p = sub.add_parser(kind, help=blurb)
        _add_run_flags(p)
    p = sub.add_parser("replay", help="re-run a summary.json and verify the CSVs")
    p.add_argument("summary", type=Path, help="path to summary.json")
    p.add_argument("--workers", type=int)
    return parser


def _load_config(args: argparse.Namespace, kind: str) -> ExperimentConfig:
    if args.config is not None:
        config = from_toml(Path(args.config).read_text())
        config = replace(config, kind=kind)
    else:
        config = default_config(kind)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.orbits is not None:
        overrides["n_orbits"] = args.orbits
    if args.n_max is not None:
        overrides["n_max"] = args.n_max
    if args.out is not None:
        overrides["out_dir"] = args.out
    return replace(config, **overrides) if overrides else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            summary = replay(args.summary, workers=args.workers)
            print(f"replay ok: {args.summary}")
            return 0
        config = _load_config(args, args.command)
        summary = run(config, workers=args.workers)
        print(f"wrote {summary.summary_path}")
        if summary.verdicts:
            print(json.dumps(summary.verdicts, indent=2))
        return 0
    except ReplayMismatch as e:
        print(f"replay mismatch: {e}", file=sys.stderr)
        return 3
    except ErgomaxError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
