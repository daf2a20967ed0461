import numpy as np
import pytest

from exceptions_handler import ShapeError
from models.request.training import AEHyper
from service.diffusion import collect_transitions
from service.realism import reconstruction_error, reconstruction_errors, realism_step, train_autoencoder


def test_reconstruction_error_is_non_negative_and_repeatable(untrained_ae, small_env):
    frame = small_env.render(small_env.reset())
    error = reconstruction_error(untrained_ae, frame)
    assert error >= 0.0
    assert error == reconstruction_error(untrained_ae, frame)


def test_batch_errors_match_single_errors(untrained_ae, small_env):
    frames = np.stack([small_env.render(s) for s in small_env.valid_states[:4]])
    batch = reconstruction_errors(untrained_ae, frames)
    for frame, error in zip(frames, batch):
        assert error == pytest.approx(reconstruction_error(untrained_ae, frame), rel=1e-5)
    assert reconstruction_errors(untrained_ae, np.zeros((0, 8, 8))).shape == (0,)


def test_reconstruction_error_rejects_wrong_shape(untrained_ae):
    with pytest.raises(ShapeError):
        reconstruction_error(untrained_ae, np.zeros((4, 4), dtype=np.float32))


def test_realism_step_stays_in_range(untrained_ae, small_env):
    frame = small_env.render(small_env.reset())
    out = realism_step(untrained_ae, frame, step_size=0.5)
    assert out.shape == frame.shape
    assert np.isfinite(out).all()
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_realism_step_lowers_the_error_of_noisy_frames(untrained_ae, small_env, rng):
    states = small_env.valid_states
    lowered = []
    for i in range(100):
        frame = small_env.render(states[i % len(states)])
        noisy = np.clip(frame + 0.1 * rng.standard_normal(frame.shape), 0.0, 1.0).astype(np.float32)
        stepped = realism_step(untrained_ae, noisy)
        lowered.append(reconstruction_error(untrained_ae, stepped) < reconstruction_error(untrained_ae, noisy))
    assert np.mean(lowered) >= 0.95


@pytest.mark.slow
def test_autoencoder_learns_clean_frames(small_config):
    data = collect_transitions(small_config, k=1, episodes=20, policy=lambda s, rng: rng.integers(3), seed=0)
    hyper = AEHyper(hidden=32, bottleneck=8, epochs=120, clean_threshold=2.0)
    ae, curve = train_autoencoder(data.targets, hyper, seed=0, show_progress=False)
    assert len(curve) == hyper.epochs
    assert curve[-1]["held_out_error"] <= hyper.clean_threshold
    assert curve[-1]["loss"] < curve[0]["loss"]
