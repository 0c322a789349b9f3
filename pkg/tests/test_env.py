import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from somxfer.env import (DIRECTIONS, N_ACTIONS, STAY, Circle, NavEnv, Rect, default_world, load_world,
                         world_from_dict, world_to_dict)


@pytest.fixture(scope="module")
def world():
    return default_world()


def test_defaults(world):
    assert world.step_length == pytest.approx(1.2)
    assert world.n_actions == N_ACTIONS == 9
    assert world.n_stimuli == 4
    assert world.n_features == 204
    assert sorted(world.goals) == ["1", "2", "3", "4", "5"]


def test_east_step(world):
    s2, hit = world.step(np.array([50.0, 50.0]), 0)
    assert not hit
    np.testing.assert_allclose(s2, [51.2, 50.0], atol=1e-12)


def test_diagonal_step_length(world):
    for a in range(8):
        s2, hit = world.step(np.array([20.0, 40.0]), a)
        assert not hit
        assert math.hypot(s2[0] - 20.0, s2[1] - 40.0) == pytest.approx(1.2, abs=1e-12)


def test_stay_never_moves_or_collides(world):
    s2, hit = world.step(np.array([0.0, 0.0]), STAY)
    assert not hit and tuple(s2) == (0.0, 0.0)


def test_wall_collision_keeps_position(world):
    s2, hit = world.step(np.array([99.5, 50.0]), 0)
    assert hit
    np.testing.assert_array_equal(s2, [99.5, 50.0])
    s2, hit = world.step(np.array([0.5, 0.5]), 5)
    assert hit


def test_obstacle_collision(world):
    # heading east into the lower bar from its left edge
    s2, hit = world.step(np.array([44.5, 20.0]), 0)
    assert hit and tuple(s2) == (44.5, 20.0)


def test_segment_through_thin_obstacle_is_blocked():
    env = NavEnv(obstacles=(Rect(50.2, 0.0, 0.3, 100.0),))
    s2, hit = env.step(np.array([49.9, 50.0]), 0)
    assert hit
    nxt, col = env.step_batch([[49.9, 50.0]], [0])
    assert col[0]


def test_invalid_action(world):
    with pytest.raises(ValueError):
        world.step(np.array([1.0, 1.0]), 9)


def test_step_matches_batch_on_random_walk(world):
    rng = np.random.default_rng(0)
    xy = world.sample_free(rng, 200)
    for _ in range(50):
        acts = rng.integers(0, N_ACTIONS, size=len(xy))
        nb, cb = world.step_batch(xy, acts)
        for i in range(len(xy)):
            s2, hit = world.step(xy[i], int(acts[i]))
            assert hit == cb[i]
            np.testing.assert_array_equal(s2, nb[i])
        assert world.is_free(nb).all()
        xy = nb


@given(st.floats(0, 100), st.floats(0, 100), st.integers(0, 8))
def test_step_stays_inside_and_consistent(x, y, a):
    env = default_world()
    s2, hit = env.step(np.array([x, y]), a)
    assert 0 <= s2[0] <= 100 and 0 <= s2[1] <= 100
    if hit:
        assert tuple(s2) == (x, y)
    else:
        np.testing.assert_allclose(s2, np.array([x, y]) + DIRECTIONS[a] * 1.2, atol=1e-12)


def test_feature_layout(world):
    phi = world.full_features(np.array([13.0, 76.0]))
    assert phi.shape == (204,)
    np.testing.assert_array_equal(phi[:4], [1, 0, 0, 0])
    assert phi[4 + 13] == 1 and phi[104 + 76] == 1
    assert phi[4:104].sum() == 1 and phi[104:].sum() == 1


def test_feature_edges(world):
    phi = world.full_features(np.array([100.0, 0.0]))
    assert phi[4 + 99] == 1 and phi[104] == 1
    phi = world.full_features(np.array([0.0, 99.999]))
    assert phi[4] == 1 and phi[104 + 99] == 1


def test_overlapping_stimuli(world):
    # A and B overlap around x = 24
    np.testing.assert_array_equal(world.env_features(np.array([24.0, 76.0])), [1, 1, 0, 0])


def test_features_batch_matches_scalar(world):
    rng = np.random.default_rng(1)
    xy = rng.random((300, 2)) * 100
    fb = world.features_batch(xy)
    for i in range(len(xy)):
        np.testing.assert_array_equal(fb[i], world.full_features(xy[i]))


def test_tabular_features(world):
    tab = world.with_features("tabular", 10)
    phi = tab.full_features(np.array([35.0, 72.0]))
    assert phi.shape == (104,)
    assert phi[4 + 3 * 10 + 7] == 1 and phi[4:].sum() == 1


def test_rewards(world):
    assert world.reward("1", np.array([13.0, 76.0]), False) == 100.0
    assert world.reward("1", np.array([50.0, 50.0]), True) == -100.0
    assert world.reward("1", np.array([50.0, 50.0]), False) == -10.0
    np.testing.assert_array_equal(world.reward_batch("1", [[13.0, 76.0], [50, 50], [50, 50]], [True, True, False]),
                                  [100.0, -100.0, -10.0])


def test_goal_boundary_is_inclusive(world):
    assert world.is_terminal("2", np.array([83.0, 20.0]))
    assert not world.is_terminal("2", np.array([83.0 + 1e-9, 20.0]))


def test_unknown_task(world):
    with pytest.raises(KeyError, match="unknown task"):
        world.is_terminal("9", np.array([0.0, 0.0]))


def test_sample_free_excludes_goal(world):
    pts = world.sample_free(np.random.default_rng(2), 500, exclude=world.task("3"))
    assert pts.shape == (500, 2)
    assert world.is_free(pts).all()
    assert not world.in_goal_batch("3", pts).any()


def test_world_round_trip(tmp_path, world):
    path = tmp_path / "w.json"
    path.write_text(json.dumps(world_to_dict(world)))
    assert load_world(path) == world


def test_world_file_errors():
    with pytest.raises(ValueError, match="missing field 'width'"):
        world_from_dict({"height": 10})
    with pytest.raises(ValueError, match="outside"):
        NavEnv(goals={"g": Circle(120, 5, 1)})
    with pytest.raises(ValueError):
        NavEnv(feature_mode="radial")
