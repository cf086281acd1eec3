#!/usr/bin/env python3
"""JSON-lines subprocess bridge for the TypeScript binding.

One request per line on stdin, one response per line on stdout. Each bridge
process owns at most one environment (the core env is single-owner), so the
handle lifecycle maps onto the process lifecycle.

Numeric payloads cross the boundary as 17-significant-digit strings, the
same formatter the CSV step logs use, so binding-driven runs can be compared
bitwise against CLI-generated logs.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from quadsim import DroneEnv, __version__, load_scenario
from quadsim.env import _ACTION_WIDTH
from quadsim.harness import resolve_scenario
from quadsim.logio import format_value


def _fmt_rows(block: np.ndarray) -> list[list[str]]:
    return [[format_value(v) for v in row] for row in np.atleast_2d(block)]


def _action_bounds(env: DroneEnv) -> tuple[list, list]:
    mode = env.config.action_mode
    if mode == "rpm":
        return [0.0] * 4, [env.model.max_rpm] * 4
    if mode == "one_d_rpm":
        return [-1.0], [1.0]
    if mode == "velocity":
        # direction components are free, magnitude is clamped to [0, v_cap]
        return [None, None, None, 0.0], [None, None, None, env.v_cap]
    f_max = 4.0 * env.model.kf * env.model.max_rpm ** 2
    t_xy = env.model.arm * env.model.kf * env.model.max_rpm ** 2
    t_z = 2.0 * env.model.kt * env.model.max_rpm ** 2
    return [0.0, -t_xy, -t_xy, -t_z], [f_max, t_xy, t_xy, t_z]


def _spaces(env: DroneEnv) -> dict:
    low, high = _action_bounds(env)
    return {
        "n_drones": env.n,
        "action_mode": env.config.action_mode,
        "obs_shape": [env.n, 20],
        "action_shape": [env.n, _ACTION_WIDTH[env.config.action_mode]],
        "action_low": low,
        "action_high": high,
        "task": env.config.task.kind,
    }


def _obs_payload(obs) -> list[list[str]]:
    return _fmt_rows(obs.as_array())


class Bridge:
    def __init__(self):
        self.env: DroneEnv | None = None
        self.closed = False

    def handle(self, req: dict) -> dict:
        op = req.get("op")
        if self.closed:
            raise RuntimeError("handle is closed")
        if op == "make":
            return self.make(req)
        if self.env is None:
            raise RuntimeError("no environment: call make first")
        if op == "reset":
            return {"obs": _obs_payload(self.env.reset())}
        if op == "step":
            return self.step(req)
        if op == "spaces":
            return _spaces(self.env)
        if op == "close":
            self.closed = True
            return {}
        raise ValueError(f"unknown op: {op!r}")

    def make(self, req: dict) -> dict:
        if self.env is not None:
            raise RuntimeError("environment already made in this process")
        if "config_text" in req:
            with tempfile.NamedTemporaryFile(
                    "w", suffix=".cfg", delete=False) as fh:
                fh.write(req["config_text"])
                path = Path(fh.name)
        elif "scenario" in req:
            path = resolve_scenario(req["scenario"])
        else:
            raise ValueError("make needs 'scenario' or 'config_text'")
        self.env = DroneEnv(load_scenario(path))
        return {"version": __version__, "spaces": _spaces(self.env)}

    def step(self, req: dict) -> dict:
        env = self.env
        acts = req["actions"]
        if len(acts) != env.n:
            raise ValueError(
                f"action array has {len(acts)} rows, expected {env.n}")
        result = env.step({i: np.asarray(a, dtype=float)
                           for i, a in enumerate(acts)})
        return {
            "obs": _obs_payload(result.obs),
            "states": _fmt_rows(result.info["states"]),
            "commanded_rpms": _fmt_rows(result.info["commanded_rpms"]),
            "rewards": {str(k): format_value(v)
                        for k, v in result.rewards.items()},
            "done": result.done,
            "action_clipped": bool(result.info["action_clipped"]),
            "sim_time": format_value(result.info["sim_time"]),
        }


def main() -> None:
    bridge = Bridge()
    out = sys.stdout
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        try:
            result = bridge.handle(req)
            resp = {"id": req.get("id"), "ok": True, "result": result}
        except Exception as exc:  # surfaced to the TS side with message intact
            resp = {"id": req.get("id"), "ok": False,
                    "error": f"{type(exc).__name__}: {exc}"}
        out.write(json.dumps(resp) + "\n")
        out.flush()
        if req.get("op") == "close":
            break


if __name__ == "__main__":
    main()
