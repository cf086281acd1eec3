"""Drone model parameters and scenario configuration.

Models and scenarios live in flat ``key = value`` text files (``#`` starts a
comment).  A drone model file carries the physical constants of one vehicle
type; a scenario file describes a whole run (vehicles, frequencies, enabled
aerodynamic effects, task, duration, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "ConfigError",
    "Frame",
    "DroneModel",
    "DroneSpec",
    "TaskSpec",
    "WorldConfig",
    "parse_kv",
    "load_drone_model",
    "save_drone_model",
    "resolve_model",
    "load_scenario",
    "hover_rpm",
    "mixing_matrix",
]

VALID_EFFECTS = ("drag", "ground_effect", "downwash")
VALID_TASKS = ("none", "hover_single", "leader_follower")
VALID_ACTION_MODES = ("rpm", "velocity", "thrust_torques", "one_d_rpm")
VALID_INTEGRATORS = ("euler", "rk4")


class ConfigError(ValueError):
    """Malformed or physically invalid model/scenario input."""


class Frame(Enum):
    CROSS = "cross"
    PLUS = "plus"


# Motor layout convention: motors indexed 0..3 counterclockwise seen from
# above.  Plus frame puts motor 0 on +x; cross frame puts motor 0 at +45 deg
# from +x.  Motor i spins so its reaction torque about body z carries sign
# (-1)**(i+1).
def _motor_xy(frame: Frame, arm: float) -> np.ndarray:
    if frame is Frame.PLUS:
        ang0 = 0.0
    else:
        ang0 = math.pi / 4.0
    out = np.empty((4, 2))
    for i in range(4):
        a = ang0 + i * math.pi / 2.0
        out[i, 0] = arm * math.cos(a)
        out[i, 1] = arm * math.sin(a)
    return out


_MODEL_FLOAT_KEYS = ("mass", "arm", "kf", "kt", "prop_radius", "max_rpm",
                     "kg_coeff", "kd1", "kd2", "kd3", "neighbor_radius_default")
_MODEL_VEC_KEYS = ("inertia_diag", "drag_coeffs")
_MODEL_POSITIVE = ("mass", "arm", "kf", "kt", "prop_radius", "max_rpm")


@dataclass(frozen=True)
class DroneModel:
    """Physical constants of one vehicle type (SI units, RPM for motor speed)."""

    name: str
    frame: Frame
    mass: float
    arm: float
    inertia_diag: tuple[float, float, float]
    kf: float
    kt: float
    prop_radius: float
    max_rpm: float
    drag_coeffs: tuple[float, float, float]
    kg_coeff: float
    kd1: float
    kd2: float
    kd3: float
    neighbor_radius_default: float

    def __post_init__(self):
        for key in _MODEL_POSITIVE:
            if not getattr(self, key) > 0.0:
                raise ConfigError(f"non-positive constant: {key} = {getattr(self, key)}")
        if not all(j > 0.0 for j in self.inertia_diag):
            raise ConfigError(f"non-positive constant: inertia_diag = {self.inertia_diag}")

    @cached_property
    def motor_xy(self) -> np.ndarray:
        """Body-frame (x, y) motor stations, shape (4, 2). Read-only."""
        xy = _motor_xy(self.frame, self.arm)
        xy.setflags(write=False)
        return xy

    @cached_property
    def packed(self) -> np.ndarray:
        """Flat parameter vector consumed by the compiled kernels."""
        p = np.array([
            self.mass, self.arm,
            self.inertia_diag[0], self.inertia_diag[1], self.inertia_diag[2],
            self.kf, self.kt, self.prop_radius, self.max_rpm,
            self.drag_coeffs[0], self.drag_coeffs[1], self.drag_coeffs[2],
            self.kg_coeff, self.kd1, self.kd2, self.kd3,
        ])
        p.setflags(write=False)
        return p


# packed[] index map shared with _kernels
P_MASS, P_ARM, P_JX, P_JY, P_JZ, P_KF, P_KT, P_RP, P_MAXRPM = range(9)
P_KDX, P_KDY, P_KDZ, P_KG, P_KD1, P_KD2, P_KD3 = range(9, 16)


def hover_rpm(model: DroneModel, gravity: float) -> float:
    """Motor speed at which total thrust 4*kf*P^2 balances weight m*g."""
    return math.sqrt(model.mass * gravity / (4.0 * model.kf))


def mixing_matrix(model: DroneModel) -> np.ndarray:
    """Map squared RPMs to [total thrust, tau_x, tau_y, tau_z].

    Row 0 is all ``kf``; rows 1-2 are the roll/pitch moments from the motor
    stations; row 3 alternates ``-+-+`` in ``kt``.
    """
    m = np.empty((4, 4))
    xy = model.motor_xy
    for i in range(4):
        m[0, i] = model.kf
        m[1, i] = model.kf * xy[i, 1]
        m[2, i] = -model.kf * xy[i, 0]
        m[3, i] = model.kt * (-1.0) ** (i + 1)
    return m


def parse_kv(text: str, *, source: str = "<string>") -> dict[str, list[str]]:
    """Parse ``key = value`` lines; repeated keys accumulate in order."""
    out: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out.setdefault(key.strip(), []).append(value.strip())
    return out


def _single(kv: dict[str, list[str]], key: str) -> str:
    if key not in kv:
        raise ConfigError(f"missing key: {key}")
    if len(kv[key]) != 1:
        raise ConfigError(f"duplicate key: {key}")
    return kv[key][0]


def _as_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad number for {key}: {raw!r}") from exc


def _as_vec3(key: str, raw: str) -> tuple[float, float, float]:
    parts = [p for p in raw.split(",") if p.strip()]
    if len(parts) != 3:
        raise ConfigError(f"{key} needs 3 comma-separated numbers, got {raw!r}")
    return tuple(_as_float(key, p) for p in parts)  # type: ignore[return-value]


def load_drone_model(path: str | Path) -> DroneModel:
    """Load and validate a drone model file.

    Rejects files whose derived hover RPM (at standard gravity) would reach
    the actuator bound.
    """
    path = Path(path)
    kv = parse_kv(path.read_text(), source=str(path))
    name = _single(kv, "name")
    frame_raw = _single(kv, "frame")
    try:
        frame = Frame(frame_raw)
    except ValueError as exc:
        raise ConfigError(f"bad frame: {frame_raw!r} (expected cross or plus)") from exc
    floats = {k: _as_float(k, _single(kv, k)) for k in _MODEL_FLOAT_KEYS}
    vecs = {k: _as_vec3(k, _single(kv, k)) for k in _MODEL_VEC_KEYS}
    model = DroneModel(name=name, frame=frame,
                       inertia_diag=vecs["inertia_diag"],
                       drag_coeffs=vecs["drag_coeffs"], **floats)
    h = hover_rpm(model, 9.8)
    if h >= model.max_rpm:
        raise ConfigError(
            f"hover RPM {h:.1f} >= max_rpm {model.max_rpm:.1f} for model {name!r}")
    return model


def save_drone_model(model: DroneModel, path: str | Path) -> None:
    lines = [f"name = {model.name}", f"frame = {model.frame.value}"]
    for key in _MODEL_FLOAT_KEYS:
        lines.append(f"{key} = {getattr(model, key)!r}")
    for key in _MODEL_VEC_KEYS:
        lines.append(f"{key} = " + ", ".join(repr(v) for v in getattr(model, key)))
    Path(path).write_text("\n".join(lines) + "\n")


def _builtin_path(kind: str, name: str) -> Path | None:
    base = resources.files("quadsim") / kind / f"{name}.cfg"
    try:
        with resources.as_file(base) as p:
            return p if p.exists() else None
    except FileNotFoundError:
        return None


def resolve_model(ref: str, *, relative_to: Path | None = None) -> DroneModel:
    """Resolve a model reference: a file path or a built-in model name."""
    cand = Path(ref)
    if cand.is_file():
        return load_drone_model(cand)
    if relative_to is not None and (relative_to / ref).is_file():
        return load_drone_model(relative_to / ref)
    builtin = _builtin_path("models", ref)
    if builtin is not None:
        return load_drone_model(builtin)
    raise ConfigError(f"unknown drone model: {ref!r}")


@dataclass(frozen=True)
class DroneSpec:
    model: DroneModel
    position: tuple[float, float, float]
    yaw: float = 0.0


@dataclass(frozen=True)
class TaskSpec:
    kind: str = "none"
    target: tuple[float, float, float] = (0.0, 0.0, 1.0)
    follower_offset: float = 0.0  # desired z offset of follower vs leader

    def __post_init__(self):
        if self.kind not in VALID_TASKS:
            raise ConfigError(f"bad task: {self.kind!r}")


@dataclass(frozen=True)
class WorldConfig:
    """One scenario: vehicles, rates, effects, task, duration, seed."""

    drones: tuple[DroneSpec, ...]
    gravity: float = 9.8
    physics_hz: int = 240
    control_hz: int = 48
    integrator: str = "euler"
    effects: frozenset[str] = frozenset()
    duration_s: float = 5.0
    seed: int = 0
    task: TaskSpec = TaskSpec()
    action_mode: str = "rpm"
    neighbor_obs: bool = False
    neighbor_radius: float | None = None
    # normalization bounds for task observations
    workspace_bound: float = 10.0
    omega_bound: float = 20.0
    # half-width of the one-dimensional action's RPM band around hover
    one_d_span: float = 0.05
    # free-form extras (e.g. harness policy parameters), never touched here
    extras: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.drones:
            raise ConfigError("scenario has no drones")
        if self.physics_hz <= 0 or self.control_hz <= 0:
            raise ConfigError("frequencies must be positive")
        if self.physics_hz % self.control_hz != 0:
            raise ConfigError(
                f"physics_hz {self.physics_hz} not divisible by control_hz {self.control_hz}")
        if self.integrator not in VALID_INTEGRATORS:
            raise ConfigError(f"bad integrator: {self.integrator!r}")
        if self.action_mode not in VALID_ACTION_MODES:
            raise ConfigError(f"bad action_mode: {self.action_mode!r}")
        bad = self.effects - set(VALID_EFFECTS)
        if bad:
            raise ConfigError(f"unknown effects: {sorted(bad)}")
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")
        positions = [d.position for d in self.drones]
        if len(set(positions)) != len(positions):
            raise ConfigError("initial positions must be pairwise distinct")

    @property
    def substeps(self) -> int:
        return self.physics_hz // self.control_hz

    @property
    def n_drones(self) -> int:
        return len(self.drones)

    @property
    def episode_steps(self) -> int:
        return int(round(self.duration_s * self.control_hz))


_SCENARIO_DEFAULTS = {
    "gravity": "9.8",
    "physics_hz": "240",
    "control_hz": "48",
    "integrator": "euler",
    "effects": "",
    "duration_s": "5.0",
    "seed": "0",
    "task": "none",
    "action_mode": "rpm",
    "neighbors": "false",
}

_CORE_SCENARIO_KEYS = set(_SCENARIO_DEFAULTS) | {
    "drone", "task_target", "follower_offset", "neighbor_radius",
    "workspace_bound", "omega_bound", "one_d_span",
}


def load_scenario(path: str | Path) -> WorldConfig:
    """Load a scenario file into a WorldConfig.

    Besides the core keys, repeated ``drone = <model>, x, y, z, yaw`` lines
    place vehicles.  Unrecognized keys are kept verbatim in ``extras`` for
    front ends (e.g. harness policies).
    """
    path = Path(path)
    kv = parse_kv(path.read_text(), source=str(path))
    get = lambda k: kv[k][0] if k in kv else _SCENARIO_DEFAULTS[k]

    drones = []
    for raw in kv.get("drone", []):
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 5:
            raise ConfigError(f"drone line needs '<model>, x, y, z, yaw', got {raw!r}")
        model = resolve_model(parts[0], relative_to=path.parent)
        pos = tuple(_as_float("drone position", p) for p in parts[1:4])
        drones.append(DroneSpec(model=model, position=pos,  # type: ignore[arg-type]
                                yaw=_as_float("drone yaw", parts[4])))
    if not drones:
        raise ConfigError("missing key: drone")

    effects = frozenset(e.strip() for e in get("effects").split(",") if e.strip())
    task_kind = get("task")
    target = _as_vec3("task_target", kv["task_target"][0]) if "task_target" in kv \
        else (0.0, 0.0, 1.0)
    follower_offset = _as_float("follower_offset", kv["follower_offset"][0]) \
        if "follower_offset" in kv else 0.0
    extras = {k: v[-1] for k, v in kv.items() if k not in _CORE_SCENARIO_KEYS}

    return WorldConfig(
        drones=tuple(drones),
        gravity=_as_float("gravity", get("gravity")),
        physics_hz=int(_as_float("physics_hz", get("physics_hz"))),
        control_hz=int(_as_float("control_hz", get("control_hz"))),
        integrator=get("integrator"),
        effects=effects,
        duration_s=_as_float("duration_s", get("duration_s")),
        seed=int(_as_float("seed", get("seed"))),
        task=TaskSpec(kind=task_kind, target=target, follower_offset=follower_offset),
        action_mode=get("action_mode"),
        neighbor_obs=get("neighbors").lower() in ("true", "1", "yes"),
        neighbor_radius=_as_float("neighbor_radius", kv["neighbor_radius"][0])
        if "neighbor_radius" in kv else None,
        workspace_bound=_as_float("workspace_bound", kv["workspace_bound"][0])
        if "workspace_bound" in kv else 10.0,
        omega_bound=_as_float("omega_bound", kv["omega_bound"][0])
        if "omega_bound" in kv else 20.0,
        one_d_span=_as_float("one_d_span", kv["one_d_span"][0])
        if "one_d_span" in kv else 0.05,
        extras=extras,
    )
