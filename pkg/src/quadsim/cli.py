"""Command-line front end: run scenarios, benchmark throughput, extract plot
columns from step logs."""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import __version__
from .harness import BUILTIN_SCENARIOS, bench, emit_plot_data, run_scenario
from .params import ConfigError


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="quadsim",
        description="Deterministic multi-quadcopter simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run a scenario and write CSV logs")
    pr.add_argument("scenario",
                    help="scenario file or built-in name: " + ", ".join(BUILTIN_SCENARIOS))
    pr.add_argument("--out", required=True, help="output directory")
    pr.add_argument("--seed", type=int, default=None)
    pr.add_argument("--integrator", choices=("euler", "rk4"), default=None)

    pb = sub.add_parser("bench", help="closed-loop stepping throughput")
    pb.add_argument("--drones", type=int, required=True)
    pb.add_argument("--envs", type=int, required=True)
    pb.add_argument("--duration", type=float, required=True)
    pb.add_argument("--threads", type=int, required=True)
    pb.add_argument("--physics-hz", type=int, default=240)
    pb.add_argument("--control-hz", type=int, default=48)
    pb.add_argument("--json", action="store_true", dest="as_json")

    pp = sub.add_parser("plot", help="extract columns from a step log")
    pp.add_argument("log")
    pp.add_argument("--fields", required=True, help="comma-separated column names")
    pp.add_argument("--out", default=None, help="output CSV (default: stdout)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            manifest = run_scenario(args.scenario, args.out,
                                    seed=args.seed, integrator=args.integrator)
            for tag, r in manifest["runs"].items():
                print(f"{manifest['scenario']} [{tag}]: {r['steps']} steps -> {r['log']}")
        elif args.command == "bench":
            report = bench(args.drones, args.envs, args.duration, args.threads,
                           physics_hz=args.physics_hz, control_hz=args.control_hz)
            if args.as_json:
                print(report.to_json())
            else:
                print(f"{report.drones} drones x {report.envs} envs: "
                      f"{report.sim_seconds:.2f} sim-s each in {report.wall_seconds:.3f} s "
                      f"-> speedup {report.speedup:.1f}x "
                      f"({report.steps_per_second:.0f} steps/s)")
        else:
            fields = [f.strip() for f in args.fields.split(",") if f.strip()]
            rows = emit_plot_data(args.log, fields)
            if args.out:
                with open(args.out, "w", newline="") as fh:
                    csv.writer(fh, lineterminator="\n").writerows(rows)
            else:
                csv.writer(sys.stdout, lineterminator="\n").writerows(rows)
    except (ConfigError, KeyError, ValueError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
