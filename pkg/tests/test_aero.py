import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadsim.aero import (AeroToggle, accumulate_effects, downwash_force,
                          drag_force, ground_effect)
from quadsim.dynamics import DroneState, quaternion_from_euler
from quadsim.params import hover_rpm

G = 9.8


def state_at(pos, vel=(0, 0, 0), rpms=0.0, roll=0.0, pitch=0.0):
    q = quaternion_from_euler(roll, pitch, 0.0)
    return DroneState(position=pos, quaternion=q, velocity=vel,
                      last_rpms=np.full(4, rpms))


# -- drag --------------------------------------------------------------------

def test_drag_zero_velocity(cf2x):
    s = state_at([0, 0, 1], rpms=hover_rpm(cf2x, G))
    assert np.array_equal(drag_force(cf2x, s), np.zeros(3))


def test_drag_zero_rotor_speed(cf2x):
    s = state_at([0, 0, 1], vel=[3.0, -1.0, 0.5], rpms=0.0)
    assert np.array_equal(drag_force(cf2x, s), np.zeros(3))


def test_drag_hand_value(cf2x):
    h = hover_rpm(cf2x, G)
    s = state_at([0, 0, 1], vel=[1.0, 0.0, 0.0], rpms=h)
    d = drag_force(cf2x, s)
    # independent evaluation: -kd_x * sum_i(2 pi P_i / 60) * vx
    expect = -cf2x.drag_coeffs[0] * (4.0 * 2.0 * math.pi * h / 60.0) * 1.0
    assert d[0] == pytest.approx(expect, rel=1e-12)
    assert abs(expect - (-5.56e-3)) < 2e-4   # order-of-magnitude anchor
    assert d[1] == 0.0 and d[2] == 0.0


@settings(max_examples=100, deadline=None)
@given(data=st.data())
def test_drag_opposes_velocity(cf2x, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31 - 1)))
    s = state_at(rng.normal(size=3), vel=rng.normal(size=3) * 5.0,
                 rpms=rng.uniform(0, cf2x.max_rpm))
    d = drag_force(cf2x, s)
    assert np.all(d * s.velocity <= 0.0)


# -- ground effect -----------------------------------------------------------

def test_ground_effect_vanishes_high_up(cf2x):
    h = hover_rpm(cf2x, G)
    g = ground_effect(cf2x, state_at([0, 0, 10.0], rpms=h))
    hover_thrust = cf2x.kf * h * h
    assert np.all(g < 1e-6 * hover_thrust)


def test_ground_effect_unclamped_identity(cf2x):
    # above the clamp height the published form holds exactly
    h = hover_rpm(cf2x, G)
    z = 0.1
    g = ground_effect(cf2x, state_at([0, 0, z], rpms=h))
    expect = cf2x.kg_coeff * cf2x.kf * (cf2x.prop_radius / (4.0 * z)) ** 2 * h * h
    assert np.allclose(g, expect, rtol=1e-12)


def test_ground_effect_clamped_at_prop_radius(cf2x):
    # below one propeller radius the height clamps, freezing the bonus
    h = hover_rpm(cf2x, G)
    g_low = ground_effect(cf2x, state_at([0, 0, 0.25 * cf2x.prop_radius], rpms=h))
    g_clamp = ground_effect(cf2x, state_at([0, 0, cf2x.prop_radius], rpms=h))
    assert np.allclose(g_low, g_clamp, rtol=1e-12)
    expect = cf2x.kg_coeff * cf2x.kf * (1.0 / 16.0) * h * h
    assert np.allclose(g_clamp, expect, rtol=1e-12)


def test_ground_effect_monotone_decreasing(cf2x):
    h = hover_rpm(cf2x, G)
    heights = np.linspace(cf2x.prop_radius, 1.0, 100)
    vals = [ground_effect(cf2x, state_at([0, 0, z], rpms=h))[0] for z in heights]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_ground_effect_tilt_cutoff(cf2x):
    h = hover_rpm(cf2x, G)
    level = ground_effect(cf2x, state_at([0, 0, 0.1], rpms=h))
    tilted = ground_effect(cf2x, state_at([0, 0, 0.1], rpms=h,
                                          roll=math.radians(35.0)))
    assert np.all(level > 0.0)
    assert np.array_equal(tilted, np.zeros(4))


# -- downwash ----------------------------------------------------------------

def test_downwash_coaxial(cf2x):
    below = state_at([0, 0, 0.5])
    above = state_at([0, 0, 1.5])
    w = downwash_force(cf2x, below, above)
    expect = -cf2x.kd1 * (cf2x.prop_radius / 4.0) ** 2
    assert w[2] == pytest.approx(expect, rel=1e-12)
    assert w[0] == 0.0 and w[1] == 0.0


def test_downwash_one_directional(cf2x):
    below = state_at([0, 0, 1.5])
    above = state_at([0, 0, 0.5])   # actually underneath
    assert np.array_equal(downwash_force(cf2x, below, above), np.zeros(3))


def test_downwash_rotational_symmetry(cf2x):
    below = state_at([0, 0, 0.5])
    r = 0.37
    vals = []
    for ang in np.linspace(0.0, 2.0 * math.pi, 13):
        above = state_at([r * math.cos(ang), r * math.sin(ang), 1.1])
        vals.append(downwash_force(cf2x, below, above)[2])
    assert np.allclose(vals, vals[0], rtol=1e-12)


def test_downwash_far_pair_cutoff(cf2x):
    below = state_at([0, 0, 0.5])
    above = state_at([50.0, 0, 1.0])
    assert np.array_equal(downwash_force(cf2x, below, above), np.zeros(3))


# -- joint accumulation ------------------------------------------------------

def test_accumulate_all_off(cf2x):
    states = [state_at([0, 0, 0.3], rpms=1000.0),
              state_at([0, 0, 1.3], vel=[1, 0, 0], rpms=1000.0)]
    for ext in accumulate_effects(cf2x, states, AeroToggle()):
        assert np.array_equal(ext.world_force, np.zeros(3))
        assert np.array_equal(ext.per_motor_thrust_bonus, np.zeros(4))


def test_accumulate_single_drone_no_downwash(cf2x):
    ext, = accumulate_effects(cf2x, [state_at([0, 0, 1.0])],
                              AeroToggle(downwash=True))
    assert np.array_equal(ext.world_force, np.zeros(3))


def test_accumulate_stacked_matches_pairwise(cf2x):
    bottom = state_at([0, 0, 0.5])
    middle = state_at([0.05, 0, 1.0])
    top = state_at([0, 0.05, 1.5])
    exts = accumulate_effects(cf2x, [bottom, middle, top],
                              AeroToggle(downwash=True))
    # brute-force pairwise oracle: every strictly higher drone contributes
    expect_bottom = (downwash_force(cf2x, bottom, middle)
                     + downwash_force(cf2x, bottom, top))
    expect_middle = downwash_force(cf2x, middle, top)
    assert np.allclose(exts[0].world_force, expect_bottom, rtol=1e-12)
    assert np.allclose(exts[1].world_force, expect_middle, rtol=1e-12)
    assert np.array_equal(exts[2].world_force, np.zeros(3))


def test_accumulate_superposition(cf2x):
    h = hover_rpm(cf2x, G)
    states = [state_at([0, 0, 0.1], vel=[0.5, 0, 0], rpms=h),
              state_at([0.1, 0, 0.9], vel=[0, -0.5, 0], rpms=h)]
    joint = accumulate_effects(cf2x, states, AeroToggle(True, True, True))
    parts = [accumulate_effects(cf2x, states, AeroToggle(drag=True)),
             accumulate_effects(cf2x, states, AeroToggle(ground_effect=True)),
             accumulate_effects(cf2x, states, AeroToggle(downwash=True))]
    for i in range(2):
        f = sum(p[i].world_force for p in parts)
        g = sum(p[i].per_motor_thrust_bonus for p in parts)
        assert np.allclose(joint[i].world_force, f, rtol=1e-12, atol=1e-18)
        assert np.allclose(joint[i].per_motor_thrust_bonus, g, rtol=1e-12,
                           atol=1e-18)


def test_accumulate_outputs_finite(cf2x):
    h = hover_rpm(cf2x, G)
    states = [state_at([0, 0, 0.001], vel=[10, 10, -10], rpms=cf2x.max_rpm),
              state_at([0.001, 0, 0.0015], rpms=cf2x.max_rpm)]
    for ext in accumulate_effects(cf2x, states, AeroToggle(True, True, True)):
        assert np.isfinite(ext.world_force).all()
        assert np.isfinite(ext.per_motor_thrust_bonus).all()
