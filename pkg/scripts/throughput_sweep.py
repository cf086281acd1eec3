#!/usr/bin/env python3
"""Sweep the closed-loop stepping benchmark over drone/env/thread grids and
print one line per configuration.

Usage: python scripts/throughput_sweep.py [--duration 5.0]
"""

import argparse

from quadsim.harness import bench

GRID = [
    (1, 1, 1),
    (1, 4, 4),
    (16, 1, 1),
    (16, 4, 4),
    (80, 1, 1),
    (80, 4, 4),
]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--duration", type=float, default=5.0)
    args = ap.parse_args()
    print(f"{'drones':>7} {'envs':>5} {'threads':>8} {'speedup':>9} "
          f"{'steps/s':>10} {'wall s':>8}")
    for drones, envs, threads in GRID:
        r = bench(drones=drones, envs=envs, duration_s=args.duration,
                  threads=threads)
        print(f"{drones:>7} {envs:>5} {threads:>8} {r.speedup:>8.1f}x "
              f"{r.steps_per_second:>10.0f} {r.wall_seconds:>8.3f}")


if __name__ == "__main__":
    main()
