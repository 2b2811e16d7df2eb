"""Command-line entry point: `amm run`, `amm metrics`, `amm sweep`.

Every command writes a manifest next to its outputs so a run can be
reproduced exactly.  Exit codes: 0 success, 2 config/input error, 3
simulation divergence.  `AMM_LOG` selects log verbosity (debug/info/...).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .allocation import RotorGeometry, sweep_cant
from .backend import BACKEND
from .errors import AmmError, NonFiniteState
from .scenarios import Scenario, Trace, comparison_report, compute_metrics, run_scenario

log = logging.getLogger("ammsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _setup_logging() -> None:
    level = os.environ.get("AMM_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _write_manifest(out_dir: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["tool_version"] = __version__
    payload["backend"] = BACKEND
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)


def cmd_run(args) -> int:
    scenario_path = Path(args.scenario)
    if not scenario_path.exists():
        print(f"error: scenario file not found: {scenario_path}", file=sys.stderr)
        return EXIT_CONFIG
    t_start = time.perf_counter()
    try:
        scenario = Scenario.from_json(scenario_path, seed_override=args.seed,
                                      dt_override=args.dt)
    except (AmmError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"error: cannot parse scenario {scenario_path}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out) if args.out else scenario_path.parent / "out"
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / (scenario.output or f"{scenario.name}.csv")
    log.info("running scenario %s (duration %.3f s, dt %.4f s, seed %d)",
             scenario.name, scenario.duration, scenario.dt,
             scenario.disturbance.seed)
    try:
        trace = run_scenario(scenario, base_dir=scenario_path.parent)
    except NonFiniteState as e:
        print(f"error: simulation diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (AmmError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    trace.to_csv(trace_path)
    _write_manifest(out_dir, {
        "command": "run",
        "scenario_path": str(scenario_path.resolve()),
        "seed": scenario.disturbance.seed,
        "dt_s": scenario.dt,
        "duration_s": scenario.duration,
        "outputs": [str(trace_path.resolve())],
        "wall_clock_s": time.perf_counter() - t_start,
    })
    print(f"wrote {trace_path}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    t_start = time.perf_counter()
    window = tuple(args.window) if args.window else None
    report: dict = {"traces": {}, "pairs": {}}
    try:
        for path in args.trace:
            tr = Trace.from_csv(Path(path))
            report["traces"][Path(path).name] = compute_metrics(tr, window).to_dict()
        for label, free_path, dist_path in args.pair or ():
            free = Trace.from_csv(Path(free_path))
            dist = Trace.from_csv(Path(dist_path))
            rep = comparison_report(free, dist, axis=args.axis, window=window)
            report["pairs"][label] = rep.to_dict()
    except FileNotFoundError as e:
        print(f"error: trace file not found: {e.filename}", file=sys.stderr)
        return EXIT_CONFIG
    except (AmmError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if report["pairs"]:
        report["comparison_axis"] = args.axis
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.report:
        out = Path(args.report)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
        _write_manifest(out.parent, {
            "command": "metrics",
            "inputs": [str(Path(p).resolve()) for p in args.trace]
            + [str(Path(p).resolve()) for item in (args.pair or ())
               for p in item[1:]],
            "outputs": [str(out.resolve())],
            "window_s": list(window) if window else None,
            "wall_clock_s": time.perf_counter() - t_start,
        })
        print(f"wrote {out}")
    else:
        print(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    t_start = time.perf_counter()
    geom_path = Path(args.geometry)
    if not geom_path.exists():
        print(f"error: geometry file not found: {geom_path}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        geom = RotorGeometry.from_json(geom_path)
        report = sweep_cant(geom, args.cant_min, args.cant_max, args.step)
    except (AmmError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.to_csv(out)
    _write_manifest(out.parent, {
        "command": "sweep",
        "geometry_path": str(geom_path.resolve()),
        "cant_range_deg": [args.cant_min, args.cant_max, args.step],
        "outputs": [str(out.resolve())],
        "wall_clock_s": time.perf_counter() - t_start,
    })
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="amm",
                                description="Aerial mobile manipulator batch tools")
    p.add_argument("--version", action="version", version=f"ammsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write its trace")
    run.add_argument("scenario", help="scenario JSON path")
    run.add_argument("--out", help="output directory (default: <scenario>/out)")
    run.add_argument("--seed", type=int, help="override the disturbance seed")
    run.add_argument("--dt", type=float, help="override the integration step (s)")
    run.set_defaults(func=cmd_run)

    met = sub.add_parser("metrics", help="compute hold/tracking metrics from traces")
    met.add_argument("trace", nargs="*", help="trace CSV path(s)")
    met.add_argument("--window", nargs=2, type=float, metavar=("T0", "T1"))
    met.add_argument("--report", help="write the report JSON here")
    met.add_argument("--axis", default="x", choices=("x", "y", "z"))
    met.add_argument("--pair", nargs=3, action="append",
                     metavar=("LABEL", "FREE", "DISTURBED"),
                     help="free/disturbed trace pair for the comparison block")
    met.set_defaults(func=cmd_metrics)

    sweep = sub.add_parser("sweep", help="cant-angle sweep of the rotor geometry")
    sweep.add_argument("geometry", help="geometry JSON path")
    sweep.add_argument("--cant-min", type=float, default=5.0)
    sweep.add_argument("--cant-max", type=float, default=60.0)
    sweep.add_argument("--step", type=float, default=1.0)
    sweep.add_argument("--out", default="sweep.csv")
    sweep.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
