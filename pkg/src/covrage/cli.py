"""Command-line experiment driver.

Every subcommand resolves a full scenario configuration (preset, then config
file, then flags), runs one study, and writes CSV results plus a manifest and
the resolved configuration into the output directory.

Exit codes: 0 success, 2 configuration error, 3 runtime failure, 4 coverage
infeasible (only with --infeasible-error).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import PRESETS, ConfigError, ScenarioConfig
from . import runner

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_INFEASIBLE = 4

_COMMANDS = {
    "gainmap": runner.run_gainmap,
    "sweep": runner.run_sweep,
    "concentration": runner.run_concentration,
    "quantize": runner.run_quantization,
    "multipath": runner.run_multipath,
    "trace-stats": runner.run_trace_stats,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covrage",
        description="Trajectory-covering receive beamforming simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0].lower().rstrip("."))
        p.add_argument("--preset", choices=sorted(PRESETS), default="paper-120ghz",
                       help="named parameter set to start from")
        p.add_argument("--config", type=Path, help="key=value file overriding the preset")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--count", type=int, help="number of trajectories")
        p.add_argument("--bits", type=int, help="phase-shifter bits (0 = continuous)")
        p.add_argument("--beams", help="comma list of beam types (tight,loose)")
        p.add_argument("--trace", type=Path, help="input orientation trace CSV")
        p.add_argument("--infeasible-error",
                       action="store_true",
                       help="exit nonzero when any beam could not cover its trajectory")
    return parser


def _resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    cfg = PRESETS[args.preset]
    if args.config is not None:
        cfg = ScenarioConfig.from_file(args.config, base=cfg)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.count is not None:
        overrides["count"] = args.count
    if args.bits is not None:
        overrides["bits"] = args.bits
    if args.beams is not None:
        overrides["beam_types"] = tuple(b.strip() for b in args.beams.split(",") if b.strip())
    if args.trace is not None:
        overrides["trace_file"] = str(args.trace)
    return replace(cfg, **overrides)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
    except (ConfigError, FileNotFoundError, TypeError) as exc:
        print(f"covrage: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = _COMMANDS[args.command](config, args.out, threads=args.threads)
    except ConfigError as exc:
        print(f"covrage: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to exit code
        print(f"covrage: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for key, value in sorted(summary.items()):
        print(f"{key}: {value}")
    if args.infeasible_error and summary.get("infeasible_count", 0) > 0:
        print("covrage: coverage infeasible for at least one trajectory", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
