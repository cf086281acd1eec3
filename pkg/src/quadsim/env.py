"""Gym-style multi-drone environment.

One environment step translates per-drone actions into saturated motor
speeds, advances ``physics_hz / control_hz`` dynamics sub-steps (recomputing
the enabled aerodynamic effects each sub-step), and returns observations,
task rewards, a done flag, and an info map with the unnormalized truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import _kernels as K
from .control import default_gains, max_speed, mixing_pair, thrust_torques_to_rpms
from .dynamics import DroneState
from .params import ConfigError, WorldConfig, hover_rpm

__all__ = [
    "ActionError",
    "ObservationSet",
    "StepResult",
    "DroneEnv",
    "adjacency",
    "reward_hover",
    "reward_leader_follower",
    "TILT_LIMIT",
]

TILT_LIMIT = math.radians(75.0)  # episode ends past this roll/pitch

_ACTION_WIDTH = {"rpm": 4, "velocity": 4, "thrust_torques": 4, "one_d_rpm": 1}


class ActionError(ValueError):
    """Action set does not match the environment's drones or mode."""


@dataclass
class ObservationSet:
    """Per-drone 20-float state rows (position, quaternion, roll/pitch/yaw,
    linear velocity, body rates, motor speeds) plus optional adjacency rows."""

    states: dict[int, np.ndarray]
    neighbors: dict[int, np.ndarray] | None = None

    def as_array(self) -> np.ndarray:
        n = len(self.states)
        return np.stack([self.states[i] for i in range(n)])


@dataclass
class StepResult:
    obs: ObservationSet
    rewards: dict[int, float]
    done: bool
    info: dict[str, object] = field(default_factory=dict)


def adjacency(positions, radius: float) -> np.ndarray:
    """Boolean neighbor matrix: within radius, excluding self; symmetric."""
    if not radius > 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    if not isinstance(positions, np.ndarray):
        seq = list(positions)
        if seq and isinstance(seq[0], DroneState):
            positions = np.stack([s.position for s in seq])
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    a = dist <= radius
    np.fill_diagonal(a, False)
    return a


def _position_of(state) -> np.ndarray:
    if isinstance(state, DroneState):
        return state.position
    return np.asarray(state, dtype=float).reshape(-1)[:3]


def reward_hover(state, target) -> float:
    """Negated squared distance to the set point; zero only on target."""
    d = np.asarray(target, dtype=float) - _position_of(state)
    return -float(d @ d)


def reward_leader_follower(leader, follower, leader_target) -> tuple[float, float]:
    """Leader tracks its target; follower tracks the leader's altitude."""
    r0 = reward_hover(leader, leader_target)
    dz = float(_position_of(follower)[2] - _position_of(leader)[2])
    return r0, -0.5 * dz * dz


class DroneEnv:
    """Owner of all drone states; single-owner (never step one instance
    concurrently), but distinct instances are fully independent."""

    def __init__(self, config: WorldConfig):
        models = {d.model.name for d in config.drones}
        if len(models) != 1:
            raise ConfigError(f"all drones must share one model, got {sorted(models)}")
        if config.task.kind == "leader_follower" and config.n_drones < 2:
            raise ConfigError("leader_follower task needs at least 2 drones")
        self.config = config
        self.model = config.drones[0].model
        self.n = config.n_drones
        self.dt = 1.0 / config.physics_hz
        self.gains = default_gains(self.model)
        self.hover_rpm = hover_rpm(self.model, config.gravity)
        self.v_cap = max_speed(self.model, config.gravity)
        self._mix, self._mix_inv = mixing_pair(self.model)
        self._integ = K.INTEG_EULER if config.integrator == "euler" else K.INTEG_RK4

        n = self.n
        self._states = np.zeros((n, 13))
        self._last_rpms = np.zeros((n, 4))
        self._cmd = np.zeros((n, 4))
        self._ctl = np.zeros((n, 9))
        self._ext_f = np.zeros((n, 3))
        self._ext_ge = np.zeros((n, 4))
        self._obs_buf = np.empty((n, 20))
        self._gains_vec = self.gains.packed()
        from .control import _int_limits
        self._ipos_lim, self._iatt_lim = _int_limits(self.model, self.gains)
        self.rng = np.random.default_rng(config.seed)
        self.step_count = 0
        self._radius = (config.neighbor_radius
                        if config.neighbor_radius is not None
                        else self.model.neighbor_radius_default)
        self.reset()

    # -- episode control ----------------------------------------------------

    def reset(self) -> ObservationSet:
        cfg = self.config
        self._states[:] = 0.0
        for i, spec in enumerate(cfg.drones):
            self._states[i, 0:3] = spec.position
            q = np.empty(4)
            K.rpy_to_quat(0.0, 0.0, spec.yaw, q)
            self._states[i, 3:7] = q
        self._last_rpms[:] = 0.0
        self._ctl[:] = 0.0
        self._ctl[:, 8] = 1.0
        self.step_count = 0
        self.rng = np.random.default_rng(cfg.seed)
        return self._observations()

    @property
    def sim_time(self) -> float:
        return self.step_count / self.config.control_hz

    def state_of(self, i: int) -> DroneState:
        return DroneState.from_packed(self._states[i].copy(),
                                      self._last_rpms[i].copy())

    def checksum(self) -> str:
        import hashlib
        h = hashlib.sha256()
        h.update(self._states.tobytes())
        h.update(self._last_rpms.tobytes())
        h.update(str(self.step_count).encode())
        return h.hexdigest()

    # -- stepping -----------------------------------------------------------

    def step(self, actions: Mapping[int, object]) -> StepResult:
        cfg = self.config
        width = _ACTION_WIDTH[cfg.action_mode]
        if set(actions.keys()) != set(range(self.n)):
            raise ActionError(
                f"action keys {sorted(actions.keys())} != drones {list(range(self.n))}")
        acts = np.empty((self.n, width))
        for i in range(self.n):
            a = np.asarray(actions[i], dtype=float).reshape(-1)
            if a.shape[0] != width:
                raise ActionError(
                    f"action for drone {i} has width {a.shape[0]}, expected {width}")
            if not np.isfinite(a).all():
                raise ActionError(f"non-finite action for drone {i}")
            acts[i] = a

        clipped = self._to_rpms(acts)

        K.advance_all(self._states, self._last_rpms, self._cmd,
                      self.model.packed, self.model.motor_xy, cfg.gravity,
                      self.dt, cfg.substeps, self._integ,
                      "drag" in cfg.effects, "ground_effect" in cfg.effects,
                      "downwash" in cfg.effects, self._ext_f, self._ext_ge)
        if not np.isfinite(self._states).all():
            i, j = np.argwhere(~np.isfinite(self._states))[0]
            names = (["position"] * 3 + ["quaternion"] * 4
                     + ["velocity"] * 3 + ["ang_velocity"] * 3)
            raise FloatingPointError(
                f"non-finite {names[j]} for drone {i} after step {self.step_count}")
        self.step_count += 1

        K.fill_obs(self._states, self._last_rpms, self._obs_buf)
        true_states = self._obs_buf.copy()
        obs = self._observations(prefilled=True)
        rewards = self._rewards()
        done = self._done(true_states)
        info: dict[str, object] = {
            "states": true_states,
            "commanded_rpms": self._cmd.copy(),
            "action_clipped": clipped,
            "sim_time": self.sim_time,
            "bounds": self._bounds(),
        }
        return StepResult(obs=obs, rewards=rewards, done=done, info=info)

    def _to_rpms(self, acts: np.ndarray) -> bool:
        """Translate the action block into self._cmd; returns clip flag."""
        cfg = self.config
        model = self.model
        clipped = False
        if cfg.action_mode == "rpm":
            np.clip(acts, 0.0, model.max_rpm, out=self._cmd)
            clipped = bool((self._cmd != acts).any())
        elif cfg.action_mode == "one_d_rpm":
            a = np.clip(acts[:, 0], -1.0, 1.0)
            clipped = bool((a != acts[:, 0]).any())
            self._cmd[:] = (self.hover_rpm * (1.0 + cfg.one_d_span * a))[:, None]
        elif cfg.action_mode == "velocity":
            vm = np.clip(acts[:, 3], 0.0, None)
            clipped = bool((vm != acts[:, 3]).any())
            tgt_pos = np.ascontiguousarray(self._states[:, 0:3])
            tgt_vel = np.zeros((self.n, 3))
            yaws = np.empty(self.n)
            for i in range(self.n):
                norm = float(np.linalg.norm(acts[i, :3]))
                if norm >= 1e-12:
                    tgt_vel[i] = acts[i, :3] / norm * min(vm[i], self.v_cap)
                _, _, yaws[i] = K.quat_to_rpy(self._states[i, 3:7])
            K.pid_all(model.packed, model.motor_xy, self._mix, self._mix_inv,
                      self._states, tgt_pos, tgt_vel, yaws, cfg.gravity,
                      self._gains_vec, self._ipos_lim, self._iatt_lim,
                      self.gains.yaw_torque_limit, self._ctl,
                      1.0 / cfg.control_hz, self._cmd)
        else:  # thrust_torques
            f_max = 4.0 * model.kf * model.max_rpm ** 2
            t_xy = model.arm * model.kf * model.max_rpm ** 2
            t_z = 2.0 * model.kt * model.max_rpm ** 2
            lo = np.array([0.0, -t_xy, -t_xy, -t_z])
            hi = np.array([f_max, t_xy, t_xy, t_z])
            cl = np.clip(acts, lo, hi)
            clipped = bool((cl != acts).any())
            for i in range(self.n):
                self._cmd[i] = thrust_torques_to_rpms(model, cl[i, 0], cl[i, 1:4])
        return clipped

    # -- observations / rewards / termination -------------------------------

    def _bounds(self) -> dict[str, float]:
        return {
            "workspace": self.config.workspace_bound,
            "velocity": self.v_cap,
            "angle": math.pi,
            "omega": self.config.omega_bound,
            "rpm": self.model.max_rpm,
        }

    def _observations(self, prefilled: bool = False) -> ObservationSet:
        if not prefilled:
            K.fill_obs(self._states, self._last_rpms, self._obs_buf)
        block = self._obs_buf.copy()
        if self.config.task.kind != "none":
            b = self._bounds()
            block[:, 0:3] /= b["workspace"]
            block[:, 7:10] /= b["angle"]
            block[:, 10:13] /= b["velocity"]
            block[:, 13:16] /= b["omega"]
            block[:, 16:20] /= b["rpm"]
            np.clip(block, -1.0, 1.0, out=block)
        states = {i: block[i].copy() for i in range(self.n)}
        neigh = None
        if self.config.neighbor_obs:
            a = adjacency(self._states[:, 0:3], self._radius)
            neigh = {i: a[i].copy() for i in range(self.n)}
        return ObservationSet(states=states, neighbors=neigh)

    def _rewards(self) -> dict[int, float]:
        task = self.config.task
        if task.kind == "none":
            return {}
        if task.kind == "hover_single":
            return {i: reward_hover(self._states[i, 0:3], task.target)
                    for i in range(self.n)}
        r0, r1 = reward_leader_follower(self._states[0, 0:3],
                                        self._states[1, 0:3], task.target)
        return {0: r0, 1: r1}

    def _done(self, true_states: np.ndarray) -> bool:
        if self.step_count >= self.config.episode_steps:
            return True
        if (np.abs(true_states[:, 7:9]) > TILT_LIMIT).any():
            return True
        if (true_states[:, 2] < 0.0).any():
            return True
        return False

    # -- logging ------------------------------------------------------------

    def log_rows(self, rewards: dict[int, float]) -> list[list[str]]:
        """Serialized per-drone rows for the current post-step state."""
        from .logio import format_row
        K.fill_obs(self._states, self._last_rpms, self._obs_buf)
        step = self.step_count
        t = self.sim_time
        return [format_row(step, t, i, self._obs_buf[i], self._cmd[i],
                           rewards.get(i, 0.0))
                for i in range(self.n)]
