"""Optional aerodynamic contributions: drag, ground effect, downwash.

All three are pure functions of model constants and kinematic state; they
feed ExternalForces into the dynamics step and superpose linearly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .dynamics import DroneState, ExternalForces
from .params import DroneModel

__all__ = [
    "AeroToggle",
    "drag_force",
    "ground_effect",
    "downwash_force",
    "accumulate_effects",
]


@dataclass(frozen=True)
class AeroToggle:
    drag: bool = False
    ground_effect: bool = False
    downwash: bool = False

    @classmethod
    def from_effects(cls, effects) -> "AeroToggle":
        return cls(drag="drag" in effects,
                   ground_effect="ground_effect" in effects,
                   downwash="downwash" in effects)


def drag_force(model: DroneModel, state: DroneState) -> np.ndarray:
    """World-frame rotor drag, proportional to velocity and summed rotor rate."""
    out = np.empty(3)
    K.drag_one(model.packed, state.packed(), state.last_rpms, out)
    return out


def ground_effect(model: DroneModel, state: DroneState) -> np.ndarray:
    """Per-motor thrust bonus near the z=0 plane.

    Motor altitude is clamped at one prop radius; contributions vanish past a
    30-degree roll/pitch tilt, where the level-hover identification no longer
    applies.
    """
    out = np.empty(4)
    K.ground_effect_one(model.packed, model.motor_xy, state.packed(),
                        state.last_rpms, out)
    return out


def downwash_force(model: DroneModel, below: DroneState,
                   above: DroneState) -> np.ndarray:
    """Lift reduction on the lower vehicle, (0, 0, -W) at its center of mass."""
    w = K.downwash_pair(model.packed, below.position, above.position)
    return np.array([0.0, 0.0, -w])


def accumulate_effects(model: DroneModel, states: Sequence[DroneState],
                       toggles: AeroToggle) -> list[ExternalForces]:
    """Joint per-drone effects: drag + ground effect + pairwise downwash."""
    n = len(states)
    packed = np.empty((n, 13))
    rpms = np.empty((n, 4))
    for i, st in enumerate(states):
        packed[i] = st.packed()
        rpms[i] = st.last_rpms
    ext_f = np.zeros((n, 3))
    ext_ge = np.zeros((n, 4))
    K.accumulate_effects_all(model.packed, model.motor_xy, packed, rpms,
                             toggles.drag, toggles.ground_effect,
                             toggles.downwash, ext_f, ext_ge)
    return [ExternalForces(world_force=ext_f[i], per_motor_thrust_bonus=ext_ge[i])
            for i in range(n)]
