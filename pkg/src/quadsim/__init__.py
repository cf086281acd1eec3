"""Deterministic multi-quadcopter simulator with aerodynamic effect models,
a PID/NNLS control stack, and a Gym-style multi-agent environment."""

__version__ = "0.1.0"

from .params import (ConfigError, DroneModel, DroneSpec, Frame, TaskSpec,
                     WorldConfig, hover_rpm, load_drone_model, load_scenario,
                     mixing_matrix, resolve_model)
from .dynamics import (DroneState, ExternalForces, accelerations,
                       euler_angles, motor_wrench, step_dynamics)
from .aero import (AeroToggle, accumulate_effects, downwash_force,
                   drag_force, ground_effect)
from .control import (ControllerState, PidGains, default_gains, load_gains,
                      max_speed, nnls_solve, pid_step, thrust_torques_to_rpms,
                      velocity_command_to_rpms)
from .env import (ActionError, DroneEnv, ObservationSet, StepResult,
                  adjacency, reward_hover, reward_leader_follower)

__all__ = [
    "__version__",
    "ConfigError", "DroneModel", "DroneSpec", "Frame", "TaskSpec",
    "WorldConfig", "hover_rpm", "load_drone_model", "load_scenario",
    "mixing_matrix", "resolve_model",
    "DroneState", "ExternalForces", "accelerations", "euler_angles",
    "motor_wrench", "step_dynamics",
    "AeroToggle", "accumulate_effects", "downwash_force", "drag_force",
    "ground_effect",
    "ControllerState", "PidGains", "default_gains", "load_gains", "max_speed",
    "nnls_solve", "pid_step", "thrust_torques_to_rpms",
    "velocity_command_to_rpms",
    "ActionError", "DroneEnv", "ObservationSet", "StepResult", "adjacency",
    "reward_hover", "reward_leader_follower",
]
