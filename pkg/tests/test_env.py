import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadsim.dynamics import DroneState, ExternalForces, step_dynamics
from quadsim.env import (ActionError, DroneEnv, adjacency, reward_hover,
                         reward_leader_follower)
from quadsim.params import (ConfigError, DroneSpec, TaskSpec, WorldConfig,
                            resolve_model)


def make_config(n=2, task="none", action_mode="rpm", effects=(), z0=1.0,
                duration_s=2.0, **kw):
    model = resolve_model("cf2x")
    specs = tuple(DroneSpec(model=model, position=(0.5 * i, 0.0, z0))
                  for i in range(n))
    return WorldConfig(drones=specs, effects=frozenset(effects),
                       task=TaskSpec(kind=task), action_mode=action_mode,
                       duration_s=duration_s, **kw)


def hover_actions(env):
    return {i: np.full(4, env.hover_rpm) for i in range(env.n)}


# -- reset -------------------------------------------------------------------

def test_reset_initial_observations():
    env = DroneEnv(make_config(n=2))
    obs = env.reset()
    assert set(obs.states.keys()) == {0, 1}
    for i in range(2):
        assert obs.states[i].shape == (20,)
        assert np.array_equal(obs.states[i][0:3], [0.5 * i, 0.0, 1.0])
        assert np.array_equal(obs.states[i][3:7], [1.0, 0.0, 0.0, 0.0])


def test_reset_deterministic():
    a = DroneEnv(make_config()).reset()
    b = DroneEnv(make_config()).reset()
    assert np.array_equal(a.as_array(), b.as_array())


def test_reset_after_steps_matches_fresh():
    env = DroneEnv(make_config(duration_s=5.0))
    for _ in range(100):
        env.step(hover_actions(env))
    replayed = env.reset()
    fresh = DroneEnv(make_config(duration_s=5.0)).reset()
    assert np.array_equal(replayed.as_array(), fresh.as_array())
    assert env.checksum() == DroneEnv(make_config(duration_s=5.0)).checksum()


def test_env_rejects_mixed_models():
    import dataclasses
    model = resolve_model("cf2x")
    other = dataclasses.replace(model, name="other")
    cfg = make_config(n=1)
    mixed = dataclasses.replace(
        cfg, drones=(cfg.drones[0],
                     DroneSpec(model=other, position=(1.0, 0.0, 1.0))))
    with pytest.raises(ConfigError, match="share one model"):
        DroneEnv(mixed)


def test_leader_follower_needs_two():
    with pytest.raises(ConfigError, match="at least 2"):
        DroneEnv(make_config(n=1, task="leader_follower"))


# -- stepping ----------------------------------------------------------------

def test_hover_rpm_actions_hold_position():
    env = DroneEnv(make_config(n=1))
    for _ in range(10):
        r = env.step(hover_actions(env))
    assert abs(r.info["states"][0, 2] - 1.0) < 1e-6


def test_velocity_mode_climbs():
    env = DroneEnv(make_config(n=1, action_mode="velocity"))
    zs = []
    for _ in range(10):
        r = env.step({0: np.array([0.0, 0.0, 1.0, 0.5])})
        zs.append(r.info["states"][0, 2])
    assert all(b > a for a, b in zip(zs, zs[1:]))


def test_one_d_rpm_mapping():
    env = DroneEnv(make_config(n=1, task="hover_single",
                               action_mode="one_d_rpm"))
    for a in (-1.0, -0.3, 0.0, 0.7, 1.0):
        r = env.step({0: np.array([a])})
        expect = env.hover_rpm * (1.0 + 0.05 * a)
        assert np.allclose(r.info["commanded_rpms"][0], expect, rtol=1e-15)
    env.reset()
    r = env.step({0: np.zeros(1)})
    assert abs(r.info["states"][0, 2] - 1.0) < 1e-12  # a = 0 is exact hover


def test_thrust_torques_mode_hover():
    env = DroneEnv(make_config(n=1, action_mode="thrust_torques"))
    mg = env.model.mass * env.config.gravity
    r = env.step({0: np.array([mg, 0.0, 0.0, 0.0])})
    assert np.allclose(r.info["commanded_rpms"][0], env.hover_rpm, rtol=1e-12)


def test_action_rejection_leaves_env_unchanged():
    env = DroneEnv(make_config(n=2))
    env.step(hover_actions(env))
    before = env.checksum()
    with pytest.raises(ActionError, match="action keys"):
        env.step({0: np.full(4, env.hover_rpm)})
    with pytest.raises(ActionError, match="width"):
        env.step({0: np.zeros(3), 1: np.zeros(4)})
    with pytest.raises(ActionError, match="non-finite"):
        env.step({0: np.full(4, np.nan), 1: np.zeros(4)})
    assert env.checksum() == before


def test_rpm_clipping_reported():
    env = DroneEnv(make_config(n=1))
    r = env.step({0: np.full(4, env.model.max_rpm * 2.0)})
    assert r.info["action_clipped"] is True
    assert np.allclose(r.info["commanded_rpms"][0], env.model.max_rpm)
    r = env.step(hover_actions(env))
    assert r.info["action_clipped"] is False


def test_substep_equivalence_exact():
    cfg = make_config(n=2)
    env = DroneEnv(cfg)
    manual = [env.state_of(i) for i in range(2)]
    rpms = np.full(4, env.hover_rpm * 1.02)
    env.step({0: rpms, 1: rpms})
    for i in range(2):
        s = manual[i]
        for _ in range(cfg.substeps):
            s = step_dynamics(env.model, s, rpms, ExternalForces(),
                              1.0 / cfg.physics_hz, cfg.integrator,
                              cfg.gravity)
        assert np.array_equal(s.packed(), env.state_of(i).packed())


def test_done_on_episode_end():
    env = DroneEnv(make_config(n=1, duration_s=0.5))
    done = False
    for _ in range(env.config.episode_steps):
        done = env.step(hover_actions(env)).done
    assert done


def test_done_on_ground_contact():
    env = DroneEnv(make_config(n=1, z0=0.01))
    r = env.step({0: np.zeros(4)})
    while not r.done:
        r = env.step({0: np.zeros(4)})
    assert r.info["states"][0, 2] < 0.0


def test_done_on_extreme_tilt():
    env = DroneEnv(make_config(n=1, z0=5.0, duration_s=10.0))
    # hard asymmetric thrust flips the vehicle within a few control steps
    act = {0: np.array([env.model.max_rpm, env.model.max_rpm, 0.0, 0.0])}
    for _ in range(env.config.episode_steps):
        r = env.step(act)
        if r.done:
            break
    roll, pitch = r.info["states"][0, 7], r.info["states"][0, 8]
    assert max(abs(roll), abs(pitch)) > math.radians(75.0)


# -- observations ------------------------------------------------------------

def test_task_observations_normalized():
    env = DroneEnv(make_config(n=1, task="hover_single", z0=0.3))
    for _ in range(20):
        r = env.step({0: np.full(4, env.hover_rpm * 1.04)})
        v = r.obs.states[0]
        assert v.shape == (20,)
        assert np.all(v >= -1.0) and np.all(v <= 1.0)


def test_raw_observations_without_task():
    env = DroneEnv(make_config(n=1, z0=2.0))
    r = env.step(hover_actions(env))
    assert r.obs.states[0][2] == r.info["states"][0, 2]


def test_neighbor_rows():
    cfg = make_config(n=3, neighbor_obs=True, neighbor_radius=0.6)
    env = DroneEnv(cfg)
    obs = env.reset()
    assert obs.neighbors is not None
    for i in range(3):
        assert obs.neighbors[i].shape == (3,)
        assert obs.neighbors[i][i] == False  # noqa: E712 - no self-adjacency
    # drones sit at x = 0, 0.5, 1.0: only consecutive pairs within 0.6
    assert obs.neighbors[0].tolist() == [False, True, False]
    assert obs.neighbors[1].tolist() == [True, False, True]


# -- adjacency ---------------------------------------------------------------

def test_adjacency_examples():
    a = adjacency(np.array([[0, 0, 0], [0.5, 0, 0]]), 1.0)
    assert a.tolist() == [[False, True], [True, False]]
    single = adjacency(np.array([[0.0, 0.0, 0.0]]), 1.0)
    assert single.tolist() == [[False]]


def test_adjacency_accepts_drone_states():
    states = [DroneState(position=[0, 0, 0]), DroneState(position=[2, 0, 0])]
    assert not adjacency(states, 1.0).any()


def test_adjacency_rejects_bad_radius():
    with pytest.raises(ValueError, match="radius"):
        adjacency(np.zeros((2, 3)), 0.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), radius=st.floats(0.1, 3.0))
def test_adjacency_matches_bruteforce(seed, radius):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-2.0, 2.0, size=(10, 3))
    a = adjacency(pos, radius)
    assert np.array_equal(a, a.T)
    for i in range(10):
        for j in range(10):
            expect = i != j and np.linalg.norm(pos[i] - pos[j]) <= radius
            assert a[i, j] == expect


# -- rewards -----------------------------------------------------------------

def test_reward_hover_examples():
    assert reward_hover([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]) == 0.0
    assert reward_hover([0.0, 0.0, 0.0], [0.0, 0.0, 1.0]) == -1.0
    assert reward_hover([0.3, -0.4, 1.0], [0.0, 0.0, 1.0]) == pytest.approx(-0.25)


def test_reward_leader_follower_examples():
    r0, r1 = reward_leader_follower([0.0, 0.0, 0.5], [1.0, 0.0, 0.5],
                                    [0.0, 0.0, 0.5])
    assert (r0, r1) == (0.0, 0.0)
    _, r1 = reward_leader_follower([0, 0, 0.0], [0, 0, 1.0], [0, 0, 0.0])
    assert r1 == -0.5
    r0, _ = reward_leader_follower([0, 0, 0.4], [0, 0, 0.4], [0, 0, 0.5])
    assert r0 == pytest.approx(-0.01)


def test_rewards_nonpositive_random():
    rng = np.random.default_rng(17)
    pts = rng.uniform(-10, 10, size=(1000, 3))
    tgt = rng.uniform(-10, 10, size=(1000, 3))
    for p, t in zip(pts, tgt):
        assert reward_hover(p, t) <= 0.0


def test_step_reward_keys_match_task():
    env = DroneEnv(make_config(n=2))
    assert env.step(hover_actions(env)).rewards == {}
    env = DroneEnv(make_config(n=2, task="leader_follower"))
    assert set(env.step(hover_actions(env)).rewards.keys()) == {0, 1}


# -- determinism -------------------------------------------------------------

def test_replay_determinism_with_effects():
    def run():
        env = DroneEnv(make_config(n=3, effects=("drag", "ground_effect",
                                                 "downwash"), z0=0.5))
        rng = np.random.default_rng(0)
        for _ in range(40):
            acts = {i: rng.uniform(0.9, 1.1, 4) * env.hover_rpm
                    for i in range(3)}
            env.step(acts)
        return env.checksum()
    assert run() == run()
