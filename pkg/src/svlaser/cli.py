"""Command-line scenario runner.

    svlaser <scenario> [--config FILE] [--out DIR] [--set key=value ...]
    svlaser sweep <scenario> --sweep key=v1,v2,... [--jobs N] [...]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.  The
default output directory is ``$SVLASER_OUTDIR/<scenario>`` (falling back to
``runs/<scenario>``).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import (
    ConfigError,
    DegenerateSteadyStateError,
    NumericalFailureError,
    StiffnessError,
    SvlaserError,
    TruncationError,
)
from .scenarios import (
    SCENARIOS,
    SCHEMAS,
    default_out_dir,
    parse_config_text,
    resolve_config,
    run_scenario,
)

_NUMERICAL = (NumericalFailureError, StiffnessError, TruncationError,
              DegenerateSteadyStateError)


def _parse_sets(pairs: list[str]) -> dict[str, str]:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _load_config(scenario: str, config_path: str | None,
                 sets: list[str]) -> dict[str, object]:
    file_values = {}
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        file_values = parse_config_text(path.read_text())
    return resolve_config(scenario, file_values, _parse_sets(sets))


def _run_one(scenario: str, cfg: dict[str, object], out_dir: Path) -> dict:
    manifest = run_scenario(scenario, cfg, out_dir)
    print(f"{scenario}: wrote {len(manifest['files'])} data files to {out_dir} "
          f"({manifest['wallclock_s']}s)")
    return manifest


def _sweep_worker(args):
    scenario, cfg, out_dir = args
    return run_scenario(scenario, cfg, out_dir)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svlaser",
        description="Squeezed-vacuum laser simulator: run a named scenario and "
                    "emit figure-ready CSV data plus a reproducibility manifest.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--out", help="output directory (default $SVLASER_OUTDIR/<scenario>)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")

    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        add_common(p)

    sweep = sub.add_parser("sweep", help="fan one scenario out over a value list")
    sweep.add_argument("scenario", choices=SCENARIOS)
    sweep.add_argument("--sweep", required=True, metavar="KEY=V1,V2,...",
                       help="config key and comma-separated values to sweep")
    sweep.add_argument("--jobs", type=int, default=2, help="worker processes")
    add_common(sweep)

    keys = sub.add_parser("config-keys", help="list config keys for a scenario")
    keys.add_argument("scenario", choices=SCENARIOS)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "config-keys":
            for key, spec in SCHEMAS[args.scenario].items():
                print(f"{key:24s} default={spec.default!r:14} {spec.help}")
            return 0
        if args.command == "sweep":
            scenario = args.scenario
            if "=" not in args.sweep:
                raise ConfigError(f"--sweep expects key=v1,v2,..., got {args.sweep!r}")
            key, values = args.sweep.split("=", 1)
            key = key.strip()
            base_out = Path(args.out) if args.out else default_out_dir(scenario)
            jobs = []
            for value in (v.strip() for v in values.split(",") if v.strip()):
                cfg = _load_config(scenario, args.config, args.set + [f"{key}={value}"])
                jobs.append((scenario, cfg, base_out / f"{key}={value}"))
            with ProcessPoolExecutor(max_workers=max(1, args.jobs)) as pool:
                for manifest, (_, _, out_dir) in zip(pool.map(_sweep_worker, jobs), jobs):
                    print(f"{scenario}[{out_dir.name}]: done "
                          f"({manifest['wallclock_s']}s)")
            return 0
        scenario = args.command
        cfg = _load_config(scenario, args.config, args.set)
        out_dir = Path(args.out) if args.out else default_out_dir(scenario)
        _run_one(scenario, cfg, out_dir)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except SvlaserError as exc:
        # remaining package errors at the CLI boundary are config-induced
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
