"""Step-log CSV serialization.

One row per drone per control step.  Numeric fields are written with 17
significant digits so logs replay bit-exactly while staying diff-able.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

__all__ = ["LOG_HEADER", "format_value", "format_row", "write_log",
           "read_log", "write_action_log", "read_action_log"]

LOG_HEADER = [
    "step", "t", "drone",
    "x", "y", "z",
    "qw", "qx", "qy", "qz",
    "roll", "pitch", "yaw",
    "vx", "vy", "vz",
    "wx", "wy", "wz",
    "rpm0", "rpm1", "rpm2", "rpm3",
    "cmd0", "cmd1", "cmd2", "cmd3",
    "reward",
]


def format_value(v: float) -> str:
    return "%.17g" % v


def format_row(step: int, t: float, drone: int, state20, cmd4, reward: float) -> list[str]:
    row = [str(step), format_value(t), str(drone)]
    row += [format_value(v) for v in state20]
    row += [format_value(v) for v in cmd4]
    row.append(format_value(reward))
    return row


def write_log(path: str | Path, rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_HEADER)
        w.writerows(rows)


def read_log(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, list(r)


def write_action_log(path: str | Path, width: int,
                     rows: Iterable[Sequence[str]]) -> None:
    header = ["step", "drone"] + [f"a{i}" for i in range(width)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_action_log(path: str | Path) -> list[list[str]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        return list(r)
