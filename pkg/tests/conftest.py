import os

os.environ.setdefault("ENVIRONMENT", "testing")
os.environ.setdefault("SHOW_PROGRESS", "false")
os.environ.setdefault("LOG_LEVEL", "WARNING")

import numpy as np  # noqa: E402
import pytest  # noqa: E402
import torch  # noqa: E402

from models.data.env import Action  # noqa: E402
from models.data.trajectory import TrajectoryLog, TrajectoryStep  # noqa: E402
from models.request.diffusion import DiffusionHyper, NoiseParams  # noqa: E402
from models.request.env import EnvConfig  # noqa: E402
from models.request.experiment import EvaluationConfig, ExperimentConfig  # noqa: E402
from models.request.training import AEHyper, VictimHyper  # noqa: E402
from service.envcore import MiniFreeway  # noqa: E402
from service.networks import ConditionalDenoiser, FrameAutoencoder, QNetwork  # noqa: E402


@pytest.fixture
def tiny_config() -> EnvConfig:
    """4x4 grid, one lane of speed 1: small enough to enumerate by hand."""
    return EnvConfig(grid_size=4, num_lanes=1, lane_speeds=(1,), frame_size=4, episode_horizon=12)


@pytest.fixture
def small_config() -> EnvConfig:
    return EnvConfig(grid_size=6, num_lanes=1, lane_speeds=(1,), frame_size=8, episode_horizon=10)


@pytest.fixture
def default_env() -> MiniFreeway:
    return MiniFreeway(EnvConfig())


@pytest.fixture
def small_env(small_config) -> MiniFreeway:
    return MiniFreeway(small_config)


@pytest.fixture
def fast_noise() -> NoiseParams:
    return NoiseParams(num_steps=3)


@pytest.fixture
def untrained_q(small_config) -> QNetwork:
    torch.manual_seed(0)
    return QNetwork(frame_size=small_config.frame_size, hidden=(16,)).eval()


@pytest.fixture
def untrained_denoiser(small_config) -> ConditionalDenoiser:
    torch.manual_seed(1)
    return ConditionalDenoiser(frame_size=small_config.frame_size, history_len=2, hidden=32).eval()


@pytest.fixture
def untrained_ae(small_config) -> FrameAutoencoder:
    torch.manual_seed(2)
    return FrameAutoencoder(frame_size=small_config.frame_size, hidden=16, bottleneck=4).eval()


def clean_log(env: MiniFreeway, actions: list[Action], attack: str = "none", seed: int = 0) -> TrajectoryLog:
    """Log of an unperturbed episode following a fixed action script."""
    log = TrajectoryLog(env=env.config, attack=attack, seed=seed)
    state = env.reset()
    for t, action in enumerate(actions):
        next_state, reward, _ = env.step(state, action)
        log.append(TrajectoryStep(t=t, true_state=state, observed=env.render(state), action=action, reward=reward,
                                  attacked=False))
        state = next_state
    return log


@pytest.fixture
def make_clean_log():
    return clean_log


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def small_experiment(out) -> ExperimentConfig:
    """Full pipeline on the 6x6 single-lane task with budgets that finish in a few minutes."""
    return ExperimentConfig(
        env=EnvConfig(grid_size=6, num_lanes=1, lane_speeds=(1,), frame_size=8, episode_horizon=24),
        victim=VictimHyper(hidden=(64,), total_steps=8_000, learning_starts=200, replay_size=5_000,
                           eps_decay_steps=3_000, eval_every=1_000, eval_episodes=1, success_ratio=0.3),
        noise=NoiseParams(num_steps=3),
        diffusion=DiffusionHyper(history_len=2, hidden=64, train_steps=800, dataset_episodes=30),
        ae=AEHyper(hidden=32, bottleneck=8, epochs=120, dataset_episodes=20, clean_threshold=2.0),
        evaluation=EvaluationConfig(gamma2_grid=(0.0, 2.0), frequency_grid=(0.5,)),
        seeds=[0, 1],
        output_dir=out,
    )


@pytest.fixture(scope="session")
def trained_lab(tmp_path_factory):
    """Victim, denoiser and autoencoder trained once for every slow test."""
    from service.experiment import ExperimentService

    out = tmp_path_factory.mktemp("lab")
    service = ExperimentService(small_experiment(out), show_progress=False)
    service.train_victim()
    service.train_diffusion()
    service.train_ae()
    return service
