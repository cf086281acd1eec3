"""Scenario runner, throughput benchmark, and plot-data extraction.

Scenarios pair a WorldConfig with a simple driving policy (external PID
tracking, embedded-PID velocity steps, or fixed commands).  Differential
scenarios (ground-effect take-off, downwash crossing) run twice, with the
named effect on and off, and write one log per sub-run.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, _kernels as K
from .control import mixing_pair
from .env import DroneEnv
from .logio import (format_value, read_log, write_action_log, write_log)
from .params import ConfigError, DroneSpec, TaskSpec, WorldConfig, load_scenario

__all__ = ["BenchReport", "run_scenario", "bench", "emit_plot_data",
           "resolve_scenario", "BUILTIN_SCENARIOS"]

BUILTIN_SCENARIOS = ("circle4", "velstep4", "takeoff-ge", "downwash2",
                     "hover-task", "leader-follower")


def resolve_scenario(ref: str) -> Path:
    """A scenario file path or the name of a shipped scenario."""
    cand = Path(ref)
    if cand.is_file():
        return cand
    builtin = resources.files("quadsim") / "scenarios" / f"{ref}.cfg"
    with resources.as_file(builtin) as p:
        if p.is_file():
            return Path(str(p))
    raise ConfigError(f"unknown scenario: {ref!r}")


class PidTracker:
    """External PID drive: batched cascade controller over an env's drones."""

    def __init__(self, env: DroneEnv):
        self.env = env
        self.model = env.model
        self.mix, self.mix_inv = mixing_pair(self.model)
        self.ctl = np.zeros((env.n, 9))
        self.ctl[:, 8] = 1.0
        self.rpms = np.empty((env.n, 4))

    def compute(self, tgt_pos, tgt_vel, tgt_yaw) -> dict[int, np.ndarray]:
        env = self.env
        K.pid_all(self.model.packed, self.model.motor_xy, self.mix,
                  self.mix_inv, env._states,
                  np.ascontiguousarray(tgt_pos), np.ascontiguousarray(tgt_vel),
                  np.ascontiguousarray(tgt_yaw), env.config.gravity,
                  env._gains_vec, env._ipos_lim, env._iatt_lim,
                  env.gains.yaw_torque_limit, self.ctl,
                  1.0 / env.config.control_hz, self.rpms)
        return {i: self.rpms[i] for i in range(env.n)}


def _policy_targets(policy: str, cfg: WorldConfig, extras: dict, t: float,
                    env: DroneEnv):
    """(tgt_pos, tgt_vel, tgt_yaw) arrays for PID-driven policies."""
    n = cfg.n_drones
    pos0 = np.array([d.position for d in cfg.drones])
    yaw0 = np.array([d.yaw for d in cfg.drones])
    tgt_pos = pos0.copy()
    tgt_vel = np.zeros((n, 3))

    if policy == "circle":
        radius = float(extras.get("policy_radius", "0.3"))
        period = float(extras.get("policy_period", "6.0"))
        cx = float(extras.get("policy_center_x", "0.0"))
        cy = float(extras.get("policy_center_y", "0.0"))
        omega = 2.0 * math.pi / period
        for i in range(n):
            phase = math.atan2(pos0[i, 1] - cy, pos0[i, 0] - cx)
            a = phase + omega * t
            tgt_pos[i, 0] = cx + radius * math.cos(a)
            tgt_pos[i, 1] = cy + radius * math.sin(a)
            tgt_vel[i, 0] = -radius * omega * math.sin(a)
            tgt_vel[i, 1] = radius * omega * math.cos(a)
    elif policy == "takeoff":
        tz = float(extras.get("policy_target_z", "1.0"))
        tgt_pos[:, 2] = tz
    elif policy == "crossing":
        period = cfg.duration_s
        for i in range(n):
            x0 = pos0[i, 0]
            tgt_pos[i, 0] = x0 * math.cos(math.pi * t / period)
            tgt_vel[i, 0] = -x0 * math.pi / period * math.sin(math.pi * t / period)
    elif policy == "leaderfollower":
        tgt_pos[0] = cfg.task.target
        tgt_pos[1, 2] = env._states[0, 2] + cfg.task.follower_offset
    elif policy == "hoverpoint":
        pass  # hold initial positions
    else:
        raise ConfigError(f"unknown PID policy: {policy!r}")
    return tgt_pos, tgt_vel, yaw0


def _velstep_cmd(cfg: WorldConfig, extras: dict, t: float) -> np.ndarray:
    speed = float(extras.get("policy_speed", "0.5"))
    segment = float(extras.get("policy_segment", "3.0"))
    dirs = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (-1.0, 0.0, 0.0), (0.0, -1.0, 0.0))
    d = dirs[int(t / segment) % 4]
    cmd = np.empty(4)
    cmd[0:3] = d
    cmd[3] = speed
    return cmd


def _run_once(cfg: WorldConfig, policy: str, extras: dict,
              log_path: Path | None, action_path: Path | None) -> dict:
    env = DroneEnv(cfg)
    tracker = PidTracker(env) if policy in (
        "circle", "takeoff", "crossing", "leaderfollower", "hoverpoint") else None

    log_rows: list[list[str]] = []
    action_rows: list[list[str]] = []
    n_steps = cfg.episode_steps
    width = 4 if cfg.action_mode != "one_d_rpm" else 1
    hover = env.hover_rpm

    max_z = np.full(env.n, -np.inf)
    min_z = np.full(env.n, np.inf)
    max_vz = np.full(env.n, -np.inf)
    sq_err_sum = 0.0
    err_count = 0

    for step in range(n_steps):
        t = step / cfg.control_hz
        if tracker is not None:
            tgt_pos, tgt_vel, tgt_yaw = _policy_targets(policy, cfg, extras, t, env)
            actions = tracker.compute(tgt_pos, tgt_vel, tgt_yaw)
        elif policy == "velstep":
            cmd = _velstep_cmd(cfg, extras, t)
            actions = {i: cmd for i in range(env.n)}
        elif policy == "boost":
            # open-loop take-off: above-hover motor speeds, then exact hover
            factor = float(extras.get("policy_boost", "1.04"))
            boost_s = float(extras.get("policy_boost_s", "0.5"))
            rpm = hover * factor if t < boost_s else hover
            actions = {i: np.full(4, rpm) for i in range(env.n)}
        elif policy == "hover":
            if cfg.action_mode == "one_d_rpm":
                actions = {i: np.zeros(1) for i in range(env.n)}
            elif cfg.action_mode == "velocity":
                actions = {i: np.zeros(4) for i in range(env.n)}
            else:
                actions = {i: np.full(4, hover) for i in range(env.n)}
        else:
            raise ConfigError(f"unknown policy: {policy!r}")

        if action_path is not None:
            for i in range(env.n):
                a = np.asarray(actions[i], dtype=float).reshape(-1)
                action_rows.append([str(step), str(i)]
                                   + [format_value(v) for v in a])
        result = env.step(actions)
        if log_path is not None:
            log_rows.extend(env.log_rows(result.rewards))

        z = env._states[:, 2]
        vz = env._states[:, 9]
        np.maximum(max_z, z, out=max_z)
        np.minimum(min_z, z, out=min_z)
        np.maximum(max_vz, vz, out=max_vz)
        if tracker is not None:
            dx = env._states[:, 0] - tgt_pos[:, 0]
            dy = env._states[:, 1] - tgt_pos[:, 1]
            sq_err_sum += float((dx * dx + dy * dy).sum())
            err_count += env.n

    if log_path is not None:
        write_log(log_path, log_rows)
    if action_path is not None:
        write_action_log(action_path, width, action_rows)

    return {
        "steps": n_steps,
        "max_z": max_z.tolist(),
        "min_z": min_z.tolist(),
        "max_vz": max_vz.tolist(),
        "rms_xy_error": math.sqrt(sq_err_sum / err_count) if err_count else None,
    }


def run_scenario(scenario: str | Path, out_dir: str | Path,
                 seed: int | None = None, integrator: str | None = None) -> dict:
    """Execute a scenario (built-in name or file) and write CSV logs plus a
    run manifest; returns the manifest dict."""
    path = resolve_scenario(str(scenario))
    cfg = load_scenario(path)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    if integrator is not None:
        cfg = dataclasses.replace(cfg, integrator=integrator)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    policy = cfg.extras.get("policy", "hover")
    differential = cfg.extras.get("differential")

    runs: dict[str, dict] = {}
    if differential:
        if differential not in cfg.effects:
            raise ConfigError(
                f"differential effect {differential!r} not enabled in scenario")
        for tag, effects in (("on", cfg.effects),
                             ("off", cfg.effects - {differential})):
            sub = dataclasses.replace(cfg, effects=frozenset(effects))
            runs[tag] = _run_once(sub, policy, cfg.extras,
                                  out / f"{stem}__{tag}__log.csv",
                                  out / f"{stem}__{tag}__actions.csv")
            runs[tag]["log"] = f"{stem}__{tag}__log.csv"
    else:
        runs["main"] = _run_once(cfg, policy, cfg.extras,
                                 out / f"{stem}__log.csv",
                                 out / f"{stem}__actions.csv")
        runs["main"]["log"] = f"{stem}__log.csv"

    manifest = {
        "scenario": stem,
        "version": __version__,
        "config_text": path.read_text(),
        "seed": cfg.seed,
        "integrator": cfg.integrator,
        "policy": policy,
        "runs": runs,
    }
    (out / f"{stem}__manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


@dataclass(frozen=True)
class BenchReport:
    drones: int
    envs: int
    physics_hz: int
    control_hz: int
    wall_seconds: float
    sim_seconds: float
    speedup: float
    steps_per_second: float
    steps_total: int
    checksum: str

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self))


def _bench_config(drones: int, duration_s: float, physics_hz: int,
                  control_hz: int) -> WorldConfig:
    from .params import resolve_model
    model = resolve_model("cf2x")
    side = max(1, math.ceil(math.sqrt(drones)))
    specs = []
    for i in range(drones):
        x = 0.4 * (i % side)
        y = 0.4 * (i // side)
        specs.append(DroneSpec(model=model, position=(x, y, 1.0), yaw=0.0))
    return WorldConfig(drones=tuple(specs), physics_hz=physics_hz,
                       control_hz=control_hz, integrator="euler",
                       effects=frozenset(), duration_s=duration_s, seed=1,
                       task=TaskSpec(), action_mode="rpm")


def _bench_env(cfg: WorldConfig) -> str:
    """Step one environment to completion under PID hover; returns checksum."""
    env = DroneEnv(cfg)
    tracker = PidTracker(env)
    pos0 = np.array([d.position for d in cfg.drones])
    vel0 = np.zeros_like(pos0)
    yaw0 = np.zeros(env.n)
    for _ in range(cfg.episode_steps):
        actions = tracker.compute(pos0, vel0, yaw0)
        env.step(actions)
    return env.checksum()


def bench(drones: int, envs: int, duration_s: float, threads: int,
          physics_hz: int = 240, control_hz: int = 48) -> BenchReport:
    """Wall-clock throughput of the closed-loop PID hover workload.

    Whole environments are distributed across a thread pool; the report is
    thread-count independent except for wall time.
    """
    if drones < 1 or envs < 1 or threads < 1:
        raise ValueError("drones, envs, and threads must all be >= 1")
    if not duration_s > 0.0:
        raise ValueError("duration_s must be positive")
    cfg = _bench_config(drones, duration_s, physics_hz, control_hz)

    # warm-up: compile kernels and fault in every code path before timing
    warm = dataclasses.replace(cfg, duration_s=2.0 / control_hz)
    _bench_env(warm)

    start = time.perf_counter()
    if threads == 1:
        checksums = [_bench_env(cfg) for _ in range(envs)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            checksums = list(pool.map(lambda _i: _bench_env(cfg), range(envs)))
    wall = time.perf_counter() - start

    import hashlib
    combined = hashlib.sha256("".join(checksums).encode()).hexdigest()
    steps_total = cfg.episode_steps * envs
    return BenchReport(
        drones=drones, envs=envs, physics_hz=physics_hz, control_hz=control_hz,
        wall_seconds=wall, sim_seconds=duration_s,
        speedup=duration_s * envs / wall,
        steps_per_second=steps_total / wall,
        steps_total=steps_total, checksum=combined,
    )


def emit_plot_data(log_csv: str | Path, fields: list[str]) -> list[list[str]]:
    """Column-extract a step log; string-level pass-through, so numeric
    values survive byte-exactly."""
    header, rows = read_log(log_csv)
    index = {name: i for i, name in enumerate(header)}
    unknown = [f for f in fields if f not in index]
    if unknown:
        raise KeyError(f"unknown fields: {', '.join(unknown)}")
    cols = [index[f] for f in fields]
    return [fields] + [[row[c] for c in cols] for row in rows]
