import numpy as np
import pytest

from exceptions_handler import DomainError
from models.request.attack import AttackConfig, AttackVariant, DefenseKind
from service.attacks import (AttackModels, AttackState, minbest_attack, pgd_attack, rotate_attack, run_episode,
                             should_attack, transform_attack)
from service.victim import greedy_action, q_values


def test_first_k_steps_never_attack():
    st = AttackState(k=4)
    assert not any(should_attack(st, 100.0, t, 1.0) for t in range(4))
    assert st.importance_history == [100.0] * 4


def test_zero_budget_never_attacks():
    st = AttackState(k=0)
    assert not any(should_attack(st, float(t), t, 0.0) for t in range(10))


def test_budget_cap_blocks_a_top_weight():
    st = AttackState(k=4, importance_history=[0.1] * 8, attacks_so_far=2)
    assert not should_attack(st, 5.0, 8, 0.25)
    st = AttackState(k=4, importance_history=[0.1] * 8, attacks_so_far=1)
    assert should_attack(st, 5.0, 8, 0.25)


def test_low_weight_is_not_attacked():
    st = AttackState(k=1, importance_history=[1.0, 2.0, 3.0, 4.0])
    assert not should_attack(st, 0.5, 4, 0.25)


@pytest.mark.parametrize("xi", [0.15, 0.25, 0.5, 1.0])
def test_attacked_fraction_is_bounded(rng, xi):
    horizon = 200
    st = AttackState(k=4)
    for t, omega in enumerate(rng.random(horizon)):
        if should_attack(st, float(omega), t, xi):
            st.attacks_so_far += 1
    assert st.attacks_so_far / horizon < xi + 1 / horizon


@pytest.mark.parametrize("xi", [0.15, 0.25, 0.5])
def test_attacked_steps_carry_the_larger_weights(rng, xi):
    st = AttackState(k=4)
    attacked, spared = [], []
    for t, omega in enumerate(rng.random(300)):
        hit = should_attack(st, float(omega), t, xi)
        st.attacks_so_far += hit
        (attacked if hit else spared).append(omega)
    assert attacked
    assert np.mean(attacked) >= np.mean(spared)


@pytest.mark.parametrize("attack", [pgd_attack, minbest_attack])
def test_gradient_attacks_stay_in_the_ball(untrained_q, small_env, attack):
    frame = small_env.render(small_env.reset())
    epsilon = 15 / 255
    out = attack(untrained_q, frame, epsilon, 10)
    assert np.abs(out - frame).max() <= epsilon + 1e-6
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_minbest_lowers_the_best_value_at_every_iteration(untrained_q, small_env):
    epsilon, iters = 15 / 255, 6
    monotone = []
    for state in small_env.valid_states:
        frame = small_env.render(state)
        best = greedy_action(untrained_q, frame)
        values = [q_values(untrained_q, minbest_attack(untrained_q, frame, epsilon, i))[best]
                  for i in range(iters + 1)]
        monotone.append(all(after <= before + 1e-6 for before, after in zip(values, values[1:])))
    assert np.mean(monotone) >= 0.95


@pytest.mark.parametrize("attack", [pgd_attack, minbest_attack])
def test_zero_epsilon_is_identity(untrained_q, small_env, attack):
    frame = small_env.render(small_env.reset())
    np.testing.assert_array_equal(attack(untrained_q, frame, 0.0, 10), frame)
    with pytest.raises(DomainError):
        attack(untrained_q, frame, -0.1, 10)


def test_rotation_by_zero_is_identity(small_env):
    frame = small_env.render(small_env.reset())
    np.testing.assert_array_equal(rotate_attack(frame, 0.0), frame)
    with pytest.raises(DomainError):
        rotate_attack(frame, 46.0)


def test_rotation_roundtrip_on_a_smooth_blob():
    yy, xx = np.mgrid[0:32, 0:32]
    blob = np.exp(-((yy - 15.5) ** 2 + (xx - 15.5) ** 2) / (2 * 4.0 ** 2)).astype(np.float32)
    back = rotate_attack(rotate_attack(blob, 10.0), -10.0)
    assert np.abs(back - blob).max() <= 0.1


def test_transform_shifts_right_and_pads_black(small_env):
    frame = small_env.render(small_env.reset())
    out = transform_attack(frame, 1, 0)
    np.testing.assert_array_equal(out[:, 1:], frame[:, :-1])
    assert not out[:, 0].any()
    with pytest.raises(DomainError):
        transform_attack(frame, 8, 0)


def test_no_attack_episode_is_a_clean_pass_through(small_env, untrained_q, fast_noise):
    models = AttackModels(q=untrained_q, noise=fast_noise)
    log = run_episode(small_env, AttackConfig(variant=AttackVariant.NONE), models, seed=0, k=2)
    assert len(log) == small_env.config.episode_horizon
    assert log.attacked_fraction == 0.0
    for step in log.steps:
        np.testing.assert_array_equal(step.observed, small_env.render(step.true_state))
        assert "omega" in step.metrics


def test_pgd_episode_respects_the_budget(small_env, untrained_q, fast_noise):
    models = AttackModels(q=untrained_q, noise=fast_noise)
    cfg = AttackConfig(variant=AttackVariant.PGD, xi=0.25)
    log = run_episode(small_env, cfg, models, seed=0, k=2)
    assert log.attack == "pgd-15"
    assert log.attacked_fraction < 0.25 + 1 / len(log)
    for step in log.steps:
        if step.attacked:
            assert "generation_ms" in step.metrics


@pytest.mark.parametrize("variant", [AttackVariant.SHIFT_O, AttackVariant.SHIFT_I])
def test_shift_episode_with_purifier(small_env, untrained_q, untrained_denoiser, untrained_ae, fast_noise, variant):
    models = AttackModels(q=untrained_q, noise=fast_noise, denoiser=untrained_denoiser, ae=untrained_ae)
    cfg = AttackConfig(variant=variant, xi=0.5)
    log = run_episode(small_env, cfg, models, seed=1, defense=DefenseKind.PURIFIER, k=2)
    assert log.defense == "purifier"
    assert len(log) == small_env.config.episode_horizon
    assert not any(step.attacked for step in log.steps[:2])
    for step in log.steps:
        assert step.observed.shape == (8, 8)
        assert np.isfinite(step.observed).all()


def test_shift_episode_is_seeded(small_env, untrained_q, untrained_denoiser, fast_noise):
    models = AttackModels(q=untrained_q, noise=fast_noise, denoiser=untrained_denoiser)
    cfg = AttackConfig(variant=AttackVariant.SHIFT_I, xi=0.5, use_realism=False)
    a = run_episode(small_env, cfg, models, seed=4, k=2)
    b = run_episode(small_env, cfg, models, seed=4, k=2)
    np.testing.assert_array_equal(a.observed_frames, b.observed_frames)
    assert [s.action for s in a.steps] == [s.action for s in b.steps]
