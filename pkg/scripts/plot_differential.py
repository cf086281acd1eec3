#!/usr/bin/env python3
"""Run a differential scenario (takeoff-ge or downwash2) and print the
on/off altitude traces side by side for quick eyeballing or piping into a
plotting tool.

Usage: python scripts/plot_differential.py takeoff-ge [--drone 0]
"""

import argparse
import tempfile
from pathlib import Path

from quadsim.harness import emit_plot_data, run_scenario


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("scenario", choices=["takeoff-ge", "downwash2"])
    ap.add_argument("--drone", type=int, default=0)
    args = ap.parse_args()

    out = Path(tempfile.mkdtemp())
    m = run_scenario(args.scenario, out)
    cols = {}
    for tag in ("on", "off"):
        rows = emit_plot_data(out / m["runs"][tag]["log"], ["t", "drone", "z"])
        cols[tag] = [(r[0], r[2]) for r in rows[1:]
                     if int(r[1]) == args.drone]

    print("t,z_on,z_off")
    for (t, z_on), (_, z_off) in zip(cols["on"], cols["off"]):
        print(f"{t},{z_on},{z_off}")


if __name__ == "__main__":
    main()
