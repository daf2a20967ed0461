import numpy as np
import pytest

import service.envcore as envcore
from constants import AGENT_INTENSITY, CAR_INTENSITY, LANE_INTENSITY
from exceptions_handler import CapacityError, ConfigError, NotAValidRender, StateError
from models.data.env import Action, EnvState
from models.request.env import EnvConfig
from service.envcore import MiniFreeway


def test_reset_is_bottom_center_and_deterministic(default_env):
    cfg = default_env.config
    start = default_env.reset()
    assert start.agent_row == cfg.grid_size - 1
    assert start.car_cols == cfg.start_cols
    assert start == default_env.reset()


def test_degenerate_grid_is_rejected():
    with pytest.raises(ConfigError):
        EnvConfig(grid_size=0)


def test_cars_move_before_the_agent(tiny_config):
    env = MiniFreeway(tiny_config)
    state, reward, done = env.step(env.reset(), Action.UP)
    assert state == EnvState(agent_row=2, car_cols=(1,), tick=1)
    assert reward == 0.0 and not done


def test_goal_pays_and_resets(tiny_config):
    env = MiniFreeway(tiny_config)
    state, reward, _ = env.step(EnvState(agent_row=1, car_cols=(1,), tick=1), Action.UP)
    assert reward == 1.0
    assert state.agent_row == tiny_config.grid_size - 1


def test_collision_costs_and_resets(tiny_config):
    env = MiniFreeway(tiny_config)
    # the car reaches column 2 on the same step the agent enters the lane row
    state, reward, _ = env.step(EnvState(agent_row=3, car_cols=(1,), tick=1), Action.UP)
    assert reward == -1.0
    assert state.agent_row == 3


def test_stay_above_a_lane_without_a_car_is_neutral(default_env):
    state = default_env.reset()
    state = EnvState(agent_row=4, car_cols=state.car_cols, tick=0)
    _, reward, _ = default_env.step(state, Action.STAY)
    assert reward == 0.0


def test_done_at_horizon():
    env = MiniFreeway(EnvConfig(episode_horizon=3))
    state, done = env.reset(), False
    for _ in range(3):
        assert not done
        state, _, done = env.step(state, Action.STAY)
    assert done


def test_step_rejects_invalid_state(default_env):
    with pytest.raises(StateError):
        default_env.step(EnvState(agent_row=99, car_cols=(0, 4, 8)), Action.UP)


def test_render_intensities(tiny_config):
    env = MiniFreeway(tiny_config)
    frame = env.render(env.reset())
    expected = np.zeros((4, 4), dtype=np.float32)
    expected[2, :] = LANE_INTENSITY
    expected[2, 0] = CAR_INTENSITY
    expected[3, 2] = AGENT_INTENSITY
    np.testing.assert_array_equal(frame, expected)
    assert (frame == 1.0).sum() == 1


def test_render_is_injective_on_valid_states(small_env):
    frames = {small_env.render(s).tobytes() for s in small_env.valid_states}
    assert len(frames) == len(small_env.valid_states)


def test_unrender_roundtrip_on_every_valid_state(small_env):
    for state in small_env.valid_states:
        assert small_env.unrender(small_env.render(state)) == state


def test_unrender_rejects_blank_and_flipped_frames(small_env):
    with pytest.raises(NotAValidRender):
        small_env.unrender(np.zeros((8, 8), dtype=np.float32))
    frame = small_env.render(small_env.reset())
    frame[0, 0] = 0.5
    with pytest.raises(NotAValidRender):
        small_env.unrender(frame)


def test_tiny_state_space_has_eleven_states(tiny_config):
    # rows 3 and 1 see all 4 phases; row 2 excludes the phase with the car in the agent's column
    states = MiniFreeway(tiny_config).enumerate_valid_states()
    assert len(states) == 11
    assert all(s.agent_row != 0 for s in states)


def test_off_phase_state_is_not_enumerated(tiny_config):
    env = MiniFreeway(tiny_config)
    # car at column 1 only occurs at phase 1
    assert EnvState(agent_row=3, car_cols=(1,), tick=2) not in env.valid_states


def test_capacity_guard(monkeypatch):
    monkeypatch.setattr(envcore, "MAX_ENUMERATED_STATES", 10)
    with pytest.raises(CapacityError):
        MiniFreeway(EnvConfig()).enumerate_valid_states()


def test_reachable_next_successors(small_env):
    start = small_env.canonical(small_env.reset())
    successors = small_env.reachable_next(start)
    assert 1 <= len(successors) <= 3
    assert successors <= set(small_env.valid_states)
    with pytest.raises(StateError):
        small_env.reachable_next(EnvState(agent_row=0, car_cols=(0,), tick=0))


def test_value_iteration_myopic_case():
    env = MiniFreeway(EnvConfig(grid_size=4, num_lanes=1, lane_speeds=(1,), frame_size=4, discount=0.0))
    table, _ = env.value_iteration()
    for state in table.states:
        for action in Action:
            _, reward, _ = env.step(state, action)
            assert table.q(state)[action] == pytest.approx(reward)


def test_value_iteration_is_deterministic_and_positive(default_env):
    table, optimal = default_env.value_iteration()
    again, optimal_again = MiniFreeway(default_env.config).value_iteration()
    np.testing.assert_array_equal(table.values, again.values)
    assert optimal == optimal_again
    assert optimal > 0
