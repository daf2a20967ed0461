import numpy as np
import pandas as pd
import pytest

from exceptions_handler import ShapeError, TrainingError
from models.data.env import Action
from models.request.env import EnvConfig
from models.request.training import VictimHyper
from service.envcore import MiniFreeway
from service.nnkit import save_model
from service.victim import (ReplayBuffer, greedy_action, greedy_from_values, importance_weight,
                            importance_weight_from_values, q_values, train_dqn)


def test_greedy_picks_the_maximum_and_breaks_ties_low():
    assert greedy_from_values(np.array([0.1, 0.9, 0.3])) == Action.DOWN
    assert greedy_from_values(np.array([0.5, 0.5, 0.5])) == Action.UP
    values = np.array([0.2, -1.0, 0.7])
    assert greedy_from_values(values) == greedy_from_values(values + 12.5)


def test_importance_weight_formula():
    assert importance_weight_from_values(np.array([1.0, 3.0, 2.0])) == 2.0
    assert importance_weight_from_values(np.array([4.0, 4.0, 4.0])) == 0.0


def test_q_values_are_finite_and_repeatable(untrained_q, small_env):
    frame = small_env.render(small_env.reset())
    values = q_values(untrained_q, frame)
    assert values.shape == (3,)
    assert np.isfinite(values).all()
    np.testing.assert_array_equal(values, q_values(untrained_q, frame))
    assert greedy_action(untrained_q, frame) == greedy_from_values(values)
    assert importance_weight(untrained_q, frame) >= 0.0


def test_q_values_reject_wrong_frame(untrained_q):
    with pytest.raises(ShapeError):
        q_values(untrained_q, np.zeros((16, 16), dtype=np.float32))


def test_replay_buffer_wraps(rng):
    buffer = ReplayBuffer(capacity=3, frame_size=4)
    for i in range(5):
        buffer.add(np.full((4, 4), i, dtype=np.float32), i % 3, float(i), np.zeros((4, 4), dtype=np.float32))
    assert buffer.size == 3
    assert sorted(buffer.rewards.tolist()) == [2.0, 3.0, 4.0]
    frames, actions, rewards, next_frames = buffer.sample(8, rng)
    assert frames.shape == (8, 1, 4, 4) and actions.shape == (8,)


SMALL_TASK = EnvConfig(grid_size=6, num_lanes=1, lane_speeds=(1,), frame_size=8, episode_horizon=24)
SMALL_HYPER = VictimHyper(hidden=(64,), total_steps=20_000, learning_starts=200, replay_size=5_000,
                          eps_decay_steps=3_000, eval_every=1_000, eval_episodes=1, success_ratio=0.9)


def _train(hyper, seed):
    try:
        q, curve = train_dqn(SMALL_TASK, hyper, seed=seed, show_progress=False)
        return q, curve.rows
    except TrainingError as e:
        return None, e.curve


@pytest.mark.slow
def test_dqn_reaches_most_of_the_optimum():
    env = MiniFreeway(SMALL_TASK)
    _, optimal = env.value_iteration()
    q, curve = train_dqn(SMALL_TASK, SMALL_HYPER, seed=0, show_progress=False)
    assert curve.rows
    assert env.rollout_return(lambda s: greedy_action(q, env.render(s))) >= 0.9 * optimal


@pytest.mark.slow
def test_dqn_training_is_seed_deterministic(tmp_path):
    hyper = SMALL_HYPER.model_copy(update={"total_steps": 1_000, "eval_every": 500})
    first, first_curve = _train(hyper, 5)
    second, second_curve = _train(hyper, 5)
    pd.testing.assert_frame_equal(pd.DataFrame(first_curve), pd.DataFrame(second_curve))
    if first is not None:
        a = save_model(first, tmp_path / "a.safetensors")
        b = save_model(second, tmp_path / "b.safetensors")
        assert a.read_bytes() == b.read_bytes()
