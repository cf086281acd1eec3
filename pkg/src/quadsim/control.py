"""PID cascade and thrust/torque allocation.

The position loop turns setpoint errors into a desired thrust vector
(gravity feed-forward plus PID), the attitude loop turns the implied
attitude error into body torques, and non-negative least squares maps the
wrench onto feasible squared motor speeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import _kernels as K
from .dynamics import DroneState
from .params import (ConfigError, DroneModel, _as_vec3, _single,
                     hover_rpm, mixing_matrix, parse_kv)

__all__ = [
    "PidGains",
    "ControllerState",
    "load_gains",
    "default_gains",
    "pid_step",
    "velocity_command_to_rpms",
    "thrust_torques_to_rpms",
    "nnls_solve",
    "max_speed",
    "mixing_pair",
]


@dataclass(frozen=True)
class PidGains:
    """Cascade gains; position gains act on mass-normalized force [1/s^2,
    1/s^3, 1/s], attitude gains on inertia-normalized torque."""

    pos_p: tuple[float, float, float]
    pos_i: tuple[float, float, float]
    pos_d: tuple[float, float, float]
    att_p: tuple[float, float, float]
    att_i: tuple[float, float, float]
    att_d: tuple[float, float, float]
    force_int_limit: float = 0.15      # [N] cap on the integral force term
    torque_int_limit: float = 1e-3     # [N*m] cap on the integral torque term
    yaw_torque_limit: float = 5e-4     # [N*m] keeps allocation away from sign flips

    def __post_init__(self):
        for name in ("pos_p", "pos_i", "pos_d", "att_p", "att_i", "att_d"):
            if any(g < 0 for g in getattr(self, name)):
                raise ConfigError(f"negative gain in {name}")
        if not (self.force_int_limit > 0 and self.torque_int_limit > 0):
            raise ConfigError("integrator limits must be positive")

    def packed(self) -> np.ndarray:
        return np.array(self.pos_p + self.pos_i + self.pos_d
                        + self.att_p + self.att_i + self.att_d)


def load_gains(path: str | Path) -> PidGains:
    kv = parse_kv(Path(path).read_text(), source=str(path))
    vecs = {k: _as_vec3(k, _single(kv, k))
            for k in ("pos_p", "pos_i", "pos_d", "att_p", "att_i", "att_d")}
    scalars = {}
    for k in ("force_int_limit", "torque_int_limit", "yaw_torque_limit"):
        if k in kv:
            scalars[k] = float(kv[k][0])
    return PidGains(**vecs, **scalars)


def default_gains(model: DroneModel) -> PidGains:
    """Shipped gain file for the given model (falls back to cf2x gains)."""
    from importlib import resources
    base = resources.files("quadsim") / "models"
    cand = base / f"{model.name}_gains.cfg"
    if not cand.is_file():
        cand = base / "cf2x_gains.cfg"
    with resources.as_file(cand) as p:
        return load_gains(p)


@dataclass
class ControllerState:
    """Per-drone controller memory: error integrals and the last attitude
    target direction (used when commanded thrust vanishes)."""

    data: np.ndarray = field(default_factory=lambda: _fresh_ctl())

    def copy(self) -> "ControllerState":
        return ControllerState(self.data.copy())


def _fresh_ctl() -> np.ndarray:
    d = np.zeros(9)
    d[8] = 1.0  # previous desired body-z defaults to straight up
    return d


@lru_cache(maxsize=32)
def mixing_pair(model: DroneModel) -> tuple[np.ndarray, np.ndarray]:
    """(mixing matrix, inverse); read-only, cached per model."""
    mix = mixing_matrix(model)
    inv = np.linalg.inv(mix)
    mix.setflags(write=False)
    inv.setflags(write=False)
    return mix, inv


def _int_limits(model: DroneModel, gains: PidGains) -> tuple[np.ndarray, np.ndarray]:
    ipos = np.empty(3)
    iatt = np.empty(3)
    j = model.inertia_diag
    for k in range(3):
        gi = gains.pos_i[k]
        ipos[k] = gains.force_int_limit / (model.mass * gi) if gi > 0 else np.inf
        ga = gains.att_i[k]
        iatt[k] = gains.torque_int_limit / (j[k] * ga) if ga > 0 else np.inf
    return ipos, iatt


def pid_step(model: DroneModel, state: DroneState, target_pos, target_vel,
             target_yaw: float, gains: PidGains, ctl_state: ControllerState,
             dt: float, gravity: float = 9.8) -> tuple[np.ndarray, ControllerState]:
    """One controller update: setpoint -> saturated per-motor RPMs."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    mix, mix_inv = mixing_pair(model)
    ipos, iatt = _int_limits(model, gains)
    ctl = ctl_state.data.copy()
    rpms = np.empty(4)
    K.pid_one(model.packed, model.motor_xy, mix, mix_inv, state.packed(),
              np.asarray(target_pos, dtype=float).reshape(3),
              np.asarray(target_vel, dtype=float).reshape(3),
              float(target_yaw), gravity, gains.packed(), ipos, iatt,
              gains.yaw_torque_limit, ctl, dt, rpms)
    return rpms, ControllerState(ctl)


def max_speed(model: DroneModel, gravity: float = 9.8) -> float:
    """Velocity-mode cap: speed where rotor drag at hover speeds reaches 20%
    of hover thrust."""
    h = hover_rpm(model, gravity)
    omega_sum = 4.0 * 2.0 * math.pi * h / 60.0
    kd_xy = max(model.drag_coeffs[0], 1e-300)
    return 0.2 * model.mass * gravity / (kd_xy * omega_sum)


def velocity_command_to_rpms(model: DroneModel, state: DroneState, cmd,
                             gains: PidGains, ctl_state: ControllerState,
                             dt: float, gravity: float = 9.8
                             ) -> tuple[np.ndarray, ControllerState]:
    """Track a desired velocity [vx, vy, vz, vM]: direction is normalized,
    magnitude capped; the zero vector commands hover-in-place."""
    cmd = np.asarray(cmd, dtype=float).reshape(4)
    if cmd[3] < 0.0:
        raise ValueError(f"negative velocity magnitude: {cmd[3]}")
    norm = float(np.linalg.norm(cmd[:3]))
    if norm < 1e-12:
        target_vel = np.zeros(3)
    else:
        speed = min(cmd[3], max_speed(model, gravity))
        target_vel = cmd[:3] / norm * speed
    _, _, yaw = K.quat_to_rpy(state.quaternion)
    return pid_step(model, state, state.position, target_vel, yaw,
                    gains, ctl_state, dt, gravity)


def nnls_solve(a, b, max_iter: int = 100) -> np.ndarray:
    """x >= 0 minimizing ||Ax - b||_2 (Lawson-Hanson active set)."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float).reshape(a.shape[0])
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("non-finite NNLS input")
    x, iters, ok = K.nnls(a, b, max_iter)
    if not ok:
        raise RuntimeError(f"NNLS iteration cap exceeded ({iters} > {max_iter})")
    return x


def thrust_torques_to_rpms(model: DroneModel, thrust: float, torques) -> np.ndarray:
    """Allocate a (thrust, torques) wrench to feasible motor speeds.

    Returns the exact unconstrained solution whenever it is nonnegative,
    otherwise the NNLS projection; output clipped to [0, max_rpm].
    """
    torques = np.asarray(torques, dtype=float).reshape(3)
    rhs = np.array([float(thrust), torques[0], torques[1], torques[2]])
    if not np.isfinite(rhs).all():
        raise ValueError("non-finite thrust/torque demand")
    mix, mix_inv = mixing_pair(model)
    sq = mix_inv @ rhs
    if (sq < 0.0).any():
        sq = nnls_solve(mix, rhs)
    return np.minimum(np.sqrt(np.maximum(sq, 0.0)), model.max_rpm)
