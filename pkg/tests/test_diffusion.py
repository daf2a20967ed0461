import math

import numpy as np
import pytest
import torch

from exceptions_handler import DomainError, WarmupError
from models.data.env import Action
from models.data.history import HistoryWindow
from models.request.diffusion import NoiseParams
from service.diffusion import (cf_scale, collect_transitions, denoise, encode_history, guided_sample, partial_reverse,
                               preconditioners, sample_conditional, sigma_schedule, train_step)
from service.networks import DROPPED_TOKEN, NULL_ACTION_TOKEN
from service.nnkit import make_optimizer


@pytest.fixture
def window(small_env) -> HistoryWindow:
    state = small_env.reset()
    history = HistoryWindow.empty(2)
    for action in (Action.UP, Action.STAY):
        history = history.push(small_env.render(state), action)
        state, _, _ = small_env.step(state, action)
    return history


def test_preconditioners_at_half():
    pre = preconditioners(0.5, NoiseParams())
    assert pre.c_in == pytest.approx(1.41421, abs=1e-5)
    assert pre.c_out == pytest.approx(0.35355, abs=1e-5)
    assert pre.c_skip == pytest.approx(0.5)
    assert pre.c_noise == pytest.approx(-0.17329, abs=1e-5)


@pytest.mark.parametrize("sigma", [0.0, -1.0])
def test_preconditioners_need_positive_sigma(sigma):
    with pytest.raises(DomainError):
        preconditioners(sigma, NoiseParams())


def test_scaled_input_has_unit_variance():
    noise = NoiseParams()
    rng = np.random.default_rng(0)
    for sigma in (0.1, 1.0, 4.0):
        x = noise.sigma_data * rng.standard_normal(200_000) + sigma * rng.standard_normal(200_000)
        assert np.var(preconditioners(sigma, noise).c_in * x) == pytest.approx(1.0, abs=0.02)


def test_single_step_schedule():
    noise = NoiseParams(num_steps=1)
    assert sigma_schedule(noise) == [noise.sigma_max, 0.0]


def test_schedule_matches_power_interpolation():
    noise = NoiseParams()
    ladder = sigma_schedule(noise)
    assert len(ladder) == noise.num_steps + 1
    assert ladder[0] == pytest.approx(noise.sigma_max)
    assert ladder[-2] == pytest.approx(noise.sigma_min)
    assert ladder[-1] == 0.0
    lo, hi = noise.sigma_min ** (1 / noise.rho), noise.sigma_max ** (1 / noise.rho)
    for i, sigma in enumerate(ladder[:-1]):
        assert sigma == pytest.approx((hi + i / (noise.num_steps - 1) * (lo - hi)) ** noise.rho)
    assert all(a > b for a, b in zip(ladder, ladder[1:]))


def test_cf_scale_values():
    assert cf_scale(5, 5) == pytest.approx(0.3)
    assert cf_scale(0, 5) == pytest.approx(1.0)
    assert cf_scale(1, 5) == pytest.approx(0.8)
    with pytest.raises(DomainError):
        cf_scale(6, 5)
    with pytest.raises(DomainError):
        cf_scale(-1, 5)


def test_encode_history_variants(untrained_denoiser, window):
    dropped = encode_history(None, untrained_denoiser)
    assert dropped.flag.item() == 0.0
    assert torch.all(dropped.actions == DROPPED_TOKEN)

    full = encode_history(window, untrained_denoiser)
    assert full.frames.shape == (1, 2, 8, 8)
    assert full.actions.tolist() == [[int(Action.UP), int(Action.STAY)]]

    imagined = encode_history(window.with_null_last(), untrained_denoiser)
    assert imagined.actions[0, -1].item() == NULL_ACTION_TOKEN


def test_cold_history_is_rejected(untrained_denoiser, small_env):
    cold = HistoryWindow.empty(2).push(small_env.render(small_env.reset()), Action.UP)
    with pytest.raises(WarmupError):
        encode_history(cold, untrained_denoiser)


def test_denoise_keeps_the_frame_shape(untrained_denoiser, window, fast_noise):
    out = denoise(untrained_denoiser, np.zeros((8, 8), dtype=np.float32), 1.0, window, fast_noise)
    assert out.shape == (8, 8)
    assert np.isfinite(out).all()


def test_sampling_is_seeded_and_in_range(untrained_denoiser, window, fast_noise):
    a = sample_conditional(untrained_denoiser, window, fast_noise, seed=7)
    b = sample_conditional(untrained_denoiser, window, fast_noise, seed=7)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (8, 8)
    assert a.min() >= 0.0 and a.max() <= 1.0


def test_unguided_sample_matches_conditional(untrained_denoiser, untrained_q, window, fast_noise, small_env):
    true_frame = small_env.render(small_env.reset())
    guided = guided_sample(untrained_denoiser, window, untrained_q, true_frame, gamma2=0.0, ae=None,
                           noise=fast_noise, seed=3)
    plain = sample_conditional(untrained_denoiser, window, fast_noise, seed=3)
    np.testing.assert_array_equal(guided, plain)


def test_guided_sample_with_guidance_and_realism(untrained_denoiser, untrained_q, untrained_ae, window, fast_noise,
                                                 small_env):
    true_frame = small_env.render(small_env.reset())
    out = guided_sample(untrained_denoiser, window, untrained_q, true_frame, gamma2=2.0, ae=untrained_ae,
                        noise=fast_noise, seed=3)
    assert out.shape == (8, 8)
    assert np.isfinite(out).all() and out.min() >= 0.0 and out.max() <= 1.0


def test_negative_gamma2_is_rejected(untrained_denoiser, untrained_q, window, fast_noise, small_env):
    with pytest.raises(DomainError):
        guided_sample(untrained_denoiser, window, untrained_q, small_env.render(small_env.reset()), gamma2=-1.0,
                      ae=None, noise=fast_noise, seed=0)


def test_partial_reverse_without_noise_is_a_copy(untrained_denoiser, window, fast_noise, small_env):
    frame = small_env.render(small_env.reset())
    out = partial_reverse(untrained_denoiser, frame, window, 0.0, fast_noise, seed=0)
    np.testing.assert_array_equal(out, frame)
    assert out is not frame


def test_partial_reverse_rewrites_the_frame(untrained_denoiser, window, fast_noise, small_env):
    frame = small_env.render(small_env.reset())
    out = partial_reverse(untrained_denoiser, frame, window, 1.0, fast_noise, seed=0)
    assert out.shape == frame.shape
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_collect_transitions_shapes(small_config):
    data = collect_transitions(small_config, k=2, episodes=3, policy=lambda s, rng: Action.STAY, seed=0)
    per_episode = small_config.episode_horizon + 1 - 2
    assert len(data) == 3 * per_episode
    assert data.targets.shape == (3 * per_episode, 8, 8)
    assert data.history_frames.shape == (3 * per_episode, 2, 8, 8)
    assert data.history_actions.shape == (3 * per_episode, 2)


@pytest.mark.parametrize("drop_rate, expected", [(1.0, 6), (0.0, 0)])
def test_train_step_drop_counts(untrained_denoiser, small_config, fast_noise, drop_rate, expected):
    data = collect_transitions(small_config, k=2, episodes=1, policy=lambda s, rng: Action.UP, seed=0).subset(
        np.arange(6))
    opt = make_optimizer(untrained_denoiser)
    _, loss, dropped = train_step(untrained_denoiser.train(), opt, data, fast_noise, drop_rate,
                                  torch.Generator().manual_seed(0))
    assert dropped == expected
    assert math.isfinite(loss)


def test_condition_drop_rate_over_many_items(untrained_denoiser, small_config, fast_noise):
    data = collect_transitions(small_config, k=2, episodes=1, policy=lambda s, rng: Action.UP, seed=0)
    items = data.subset(np.arange(10_000) % len(data))
    _, _, dropped = train_step(untrained_denoiser.train(), make_optimizer(untrained_denoiser), items, fast_noise,
                               0.1, torch.Generator().manual_seed(0))
    assert 0.08 <= dropped / len(items) <= 0.12


def test_train_step_rejects_bad_drop_rate(untrained_denoiser, small_config, fast_noise):
    data = collect_transitions(small_config, k=2, episodes=1, policy=lambda s, rng: Action.UP, seed=0)
    with pytest.raises(DomainError):
        train_step(untrained_denoiser, make_optimizer(untrained_denoiser), data, fast_noise, 1.5,
                   torch.Generator().manual_seed(0))
