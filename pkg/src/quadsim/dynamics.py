"""Per-drone rigid-body state and explicit dynamics stepping.

Thrust and yaw torque follow the quadratic motor law; translational dynamics
run in the world frame, rotational dynamics in the body frame with diagonal
inertia.  Attitude is stored as a unit quaternion; Euler angles are derived
on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .params import DroneModel

__all__ = [
    "DroneState",
    "ExternalForces",
    "motor_wrench",
    "accelerations",
    "step_dynamics",
    "euler_angles",
    "quaternion_from_euler",
]

_STATE_FIELDS = ("position", "quaternion", "velocity", "ang_velocity")


@dataclass
class DroneState:
    """Kinematic state of one vehicle plus its last commanded motor speeds."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ang_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_rpms: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3).copy()
        self.quaternion = np.asarray(self.quaternion, dtype=float).reshape(4).copy()
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3).copy()
        self.ang_velocity = np.asarray(self.ang_velocity, dtype=float).reshape(3).copy()
        self.last_rpms = np.asarray(self.last_rpms, dtype=float).reshape(4).copy()

    def packed(self) -> np.ndarray:
        """13-float kernel layout: pos, quat(wxyz), vel, body rates."""
        return np.concatenate([self.position, self.quaternion,
                               self.velocity, self.ang_velocity])

    @classmethod
    def from_packed(cls, s: np.ndarray, last_rpms: np.ndarray) -> "DroneState":
        return cls(position=s[0:3], quaternion=s[3:7], velocity=s[7:10],
                   ang_velocity=s[10:13], last_rpms=last_rpms)

    def copy(self) -> "DroneState":
        return DroneState(self.position, self.quaternion, self.velocity,
                          self.ang_velocity, self.last_rpms)


@dataclass
class ExternalForces:
    """Aerodynamic inputs to one dynamics step.

    ``world_force`` acts at the center of mass (drag, downwash);
    ``per_motor_thrust_bonus`` acts along body +z at the motor stations
    (ground effect), adding roll/pitch moments but no yaw.
    """

    world_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    per_motor_thrust_bonus: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        self.world_force = np.asarray(self.world_force, dtype=float).reshape(3).copy()
        self.per_motor_thrust_bonus = np.asarray(
            self.per_motor_thrust_bonus, dtype=float).reshape(4).copy()
        if not (np.isfinite(self.world_force).all()
                and np.isfinite(self.per_motor_thrust_bonus).all()):
            raise ValueError("non-finite external force")


def _check_rpms(model: DroneModel, rpms: np.ndarray) -> np.ndarray:
    rpms = np.asarray(rpms, dtype=float).reshape(4)
    if (rpms < 0.0).any() or (rpms > model.max_rpm).any():
        raise ValueError(f"RPMs out of [0, {model.max_rpm}]: {rpms}")
    return rpms


def motor_wrench(model: DroneModel, rpms) -> tuple[np.ndarray, float]:
    """Per-motor thrusts (N) and net yaw torque (N*m) for the given RPMs."""
    rpms = _check_rpms(model, rpms)
    sq = rpms * rpms
    forces = model.kf * sq
    signs = np.array([-1.0, 1.0, -1.0, 1.0])
    yaw_torque = float(model.kt * (signs * sq).sum())
    return forces, yaw_torque


def accelerations(model: DroneModel, state: DroneState, rpms,
                  ext: ExternalForces, gravity: float) -> tuple[np.ndarray, np.ndarray]:
    """World-frame linear and body-frame angular acceleration."""
    rpms = _check_rpms(model, rpms)
    deriv = np.empty(13)
    K.state_deriv(state.packed(), rpms, model.packed, model.motor_xy,
                  ext.world_force, ext.per_motor_thrust_bonus, gravity, deriv)
    return deriv[7:10].copy(), deriv[10:13].copy()


def step_dynamics(model: DroneModel, state: DroneState, rpms,
                  ext: ExternalForces, dt: float, integrator: str = "euler",
                  gravity: float = 9.8) -> DroneState:
    """Advance the state one step; pure function of its arguments."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    rpms = _check_rpms(model, rpms)
    if integrator == "euler":
        integ = K.INTEG_EULER
    elif integrator == "rk4":
        integ = K.INTEG_RK4
    else:
        raise ValueError(f"unknown integrator: {integrator!r}")
    s = state.packed()

    K.step_one(s, rpms, model.packed, model.motor_xy, ext.world_force,
               ext.per_motor_thrust_bonus, gravity, dt, integ)
    if not np.isfinite(s).all():
        bad = int(np.flatnonzero(~np.isfinite(s))[0])
        names = (["position"] * 3 + ["quaternion"] * 4
                 + ["velocity"] * 3 + ["ang_velocity"] * 3)
        raise FloatingPointError(f"non-finite {names[bad]} after step (index {bad})")
    return DroneState.from_packed(s, rpms)


def euler_angles(state: DroneState) -> tuple[float, float, float]:
    """(roll, pitch, yaw): body x-y-z tilt, yaw in (-pi, pi].

    At gimbal lock yaw absorbs the free angle and roll is reported as zero.
    """
    q = np.asarray(state.quaternion, dtype=float)
    return K.quat_to_rpy(q)


def quaternion_from_euler(roll: float, pitch: float, yaw: float) -> np.ndarray:
    q = np.empty(4)
    K.rpy_to_quat(roll, pitch, yaw, q)
    return q
