"""
History-conditioned EDM denoiser: preconditioning, training with condition dropping,
and the reverse sampler with classifier-free, policy and realism guidance.
"""
import math
from dataclasses import dataclass

import numpy as np
import torch
from tqdm import tqdm

from configuration.config import get_app_settings
from constants import ERROR_COLD_HISTORY, ERROR_NON_FINITE, ERROR_SHAPE_MISMATCH, LOG_DIFFUSION_TRAINED
from exceptions_handler import DomainError, NumericsError, ShapeError, WarmupError
from models.data.env import Action, Frame
from models.data.history import HistoryWindow
from models.request.diffusion import DiffusionHyper, NoiseParams
from models.request.env import EnvConfig
from service.envcore import MiniFreeway
from service.networks import DROPPED_TOKEN, NULL_ACTION_TOKEN, ConditionalDenoiser, FrameAutoencoder, QNetwork
from service.nnkit import grad, make_optimizer, optim_step, OptimState, to_batch, to_frame
from service.realism import realism_gradient
from utils.logger import logger, log_performance
from utils.seeding import seed_everything, torch_generator


@dataclass(frozen=True)
class Preconditioners:
    c_in: float
    c_out: float
    c_noise: float
    c_skip: float


def preconditioners(sigma: float, noise: NoiseParams) -> Preconditioners:
    if not sigma > 0:
        raise DomainError(detail=f"preconditioners need sigma > 0, got {sigma}")
    sd = noise.sigma_data
    norm = math.sqrt(sigma ** 2 + sd ** 2)
    return Preconditioners(c_in=1.0 / norm, c_out=sigma * sd / norm, c_noise=0.25 * math.log(sigma),
                           c_skip=sd ** 2 / (sd ** 2 + sigma ** 2))


@dataclass(frozen=True)
class Condition:
    """Tensor encoding of a history window, batch size 1 or B."""

    frames: torch.Tensor
    actions: torch.Tensor
    flag: torch.Tensor


def encode_history(window: HistoryWindow | None, model: ConditionalDenoiser) -> Condition:
    k, size = model.history_len, model.frame_size
    if window is None:
        return Condition(frames=torch.zeros(1, k, size, size), actions=torch.full((1, k), DROPPED_TOKEN),
                         flag=torch.zeros(1))
    if window.k != k or not window.is_full:
        raise WarmupError(detail=f"{ERROR_COLD_HISTORY}: {len(window.frames)}/{k} pairs")
    frames = torch.as_tensor(np.stack(window.frames), dtype=torch.float32).unsqueeze(0)
    if frames.shape[-2:] != (size, size):
        raise ShapeError(detail=f"{ERROR_SHAPE_MISMATCH}: history frames {tuple(frames.shape[-2:])}")
    actions = torch.tensor([[NULL_ACTION_TOKEN if a is None else int(a) for a in window.actions]])
    return Condition(frames=frames, actions=actions, flag=torch.ones(1))


def _denoise_tensor(model: ConditionalDenoiser, x: torch.Tensor, sigma: float, cond: Condition,
                    noise: NoiseParams) -> torch.Tensor:
    pre = preconditioners(sigma, noise)
    c_noise = torch.full((x.shape[0],), pre.c_noise)
    out = model(pre.c_in * x, c_noise, cond.frames, cond.actions, cond.flag)
    return pre.c_skip * x + pre.c_out * out


def denoise(model: ConditionalDenoiser, noisy: Frame, sigma: float, cond: HistoryWindow | None,
            noise: NoiseParams) -> Frame:
    noisy = np.asarray(noisy, dtype=np.float32)
    if noisy.shape != (model.frame_size, model.frame_size):
        raise ShapeError(detail=f"{ERROR_SHAPE_MISMATCH}: noisy frame {noisy.shape}")
    with torch.no_grad():
        out = _denoise_tensor(model, to_batch(noisy), sigma, encode_history(cond, model), noise)
    return to_frame(out)


# -- training ----------------------------------------------------------------------------------


@dataclass
class TransitionDataset:
    """Next frames with the k (frame, action) pairs that precede them."""

    targets: np.ndarray
    history_frames: np.ndarray
    history_actions: np.ndarray

    def __len__(self) -> int:
        return len(self.targets)

    def subset(self, idx) -> "TransitionDataset":
        return TransitionDataset(self.targets[idx], self.history_frames[idx], self.history_actions[idx])


def collect_transitions(config: EnvConfig, k: int, episodes: int, policy, seed: int) -> TransitionDataset:
    """Roll out `policy(state, rng) -> Action` and slice every episode into (k-history, next frame) items."""
    env = MiniFreeway(config)
    rng = np.random.default_rng(seed)
    targets, hist_frames, hist_actions = [], [], []
    for _ in range(episodes):
        state = env.reset()
        frames, actions = [env.render(state)], []
        done = False
        while not done:
            action = Action(policy(state, rng))
            state, _, done = env.step(state, action)
            frames.append(env.render(state))
            actions.append(int(action))
        for t in range(k, len(frames)):
            targets.append(frames[t])
            hist_frames.append(np.stack(frames[t - k:t]))
            hist_actions.append(actions[t - k:t])
    return TransitionDataset(np.asarray(targets, dtype=np.float32), np.asarray(hist_frames, dtype=np.float32),
                             np.asarray(hist_actions, dtype=np.int64))


def _denoiser_loss(noise: NoiseParams):
    def loss(model, batch):
        noisy, target, sigma, frames, actions, flag = batch
        sd = noise.sigma_data
        s = sigma.reshape(-1, 1, 1, 1)
        c_in = 1.0 / torch.sqrt(s ** 2 + sd ** 2)
        c_out = s * sd / torch.sqrt(s ** 2 + sd ** 2)
        c_skip = sd ** 2 / (sd ** 2 + s ** 2)
        out = model(c_in * noisy, 0.25 * torch.log(sigma), frames, actions, flag)
        return ((out - (target - c_skip * noisy) / c_out) ** 2).mean()
    return loss


def train_step(model: ConditionalDenoiser, opt: OptimState, batch: TransitionDataset, noise: NoiseParams,
               drop_rate: float, generator: torch.Generator,
               null_action_rate: float = 0.0) -> tuple[ConditionalDenoiser, float, int]:
    """One denoising-regression update; returns the model, the batch loss and the number of dropped conditions."""
    if len(batch) == 0:
        raise ShapeError(detail="empty training batch")
    if not 0.0 <= drop_rate <= 1.0:
        raise DomainError(detail=f"drop_rate must lie in [0, 1], got {drop_rate}")
    size = len(batch)
    target = to_batch(batch.targets)
    frames = torch.as_tensor(batch.history_frames)
    actions = torch.as_tensor(batch.history_actions).clone()

    sigma = torch.exp(noise.p_mean + noise.p_std * torch.randn(size, generator=generator))
    noisy = target + sigma.reshape(-1, 1, 1, 1) * torch.randn(target.shape, generator=generator)

    dropped = torch.rand(size, generator=generator) < drop_rate
    null_last = (torch.rand(size, generator=generator) < null_action_rate) & ~dropped
    actions[null_last, -1] = NULL_ACTION_TOKEN
    frames = torch.where(dropped.reshape(-1, 1, 1, 1), torch.zeros_like(frames), frames)
    actions[dropped] = DROPPED_TOKEN
    flag = (~dropped).float()

    loss_fn = _denoiser_loss(noise)
    step_batch = (noisy, target, sigma, frames, actions, flag)
    param_grads, _ = grad(model, loss_fn, step_batch)
    with torch.no_grad():
        value = float(loss_fn(model, step_batch))
    optim_step(model, param_grads, opt)
    return model, value, int(dropped.sum())


@log_performance(threshold_ms=60_000)
def train_denoiser(dataset: TransitionDataset, config: EnvConfig, hyper: DiffusionHyper, noise: NoiseParams,
                   seed: int | None = None,
                   show_progress: bool | None = None) -> tuple[ConditionalDenoiser, list[dict[str, float]]]:
    seed = hyper.seed if seed is None else seed
    show_progress = get_app_settings().SHOW_PROGRESS if show_progress is None else show_progress
    seed_everything(seed)
    generator = torch_generator(seed)

    model = ConditionalDenoiser(frame_size=config.frame_size, history_len=hyper.history_len, hidden=hyper.hidden,
                                action_embed=hyper.action_embed, noise_embed=hyper.noise_embed)
    opt = make_optimizer(model, hyper.learning_rate)
    curve, dropped, seen = [], 0, 0
    for step in tqdm(range(1, hyper.train_steps + 1), desc="denoiser", disable=not show_progress):
        idx = torch.randint(len(dataset), (min(hyper.batch_size, len(dataset)),), generator=generator).numpy()
        _, loss, n_dropped = train_step(model, opt, dataset.subset(idx), noise, hyper.drop_rate, generator,
                                        hyper.null_action_rate)
        dropped += n_dropped
        seen += len(idx)
        if step % 100 == 0 or step == hyper.train_steps:
            curve.append({"step": step, "loss": loss, "dropped_fraction": dropped / seen})
    model.eval()
    logger.info(LOG_DIFFUSION_TRAINED, extra={"steps": hyper.train_steps, "final_loss": curve[-1]["loss"],
                                              "dropped_fraction": dropped / seen})
    return model, curve


# -- sampling ----------------------------------------------------------------------------------


def sigma_schedule(noise: NoiseParams) -> list[float]:
    """Power-interpolated ladder sigma_max -> sigma_min over T rungs, then a terminal 0."""
    steps = noise.num_steps
    if steps == 1:
        return [noise.sigma_max, 0.0]
    inv_rho = 1.0 / noise.rho
    ladder = [
        (noise.sigma_max ** inv_rho + i / (steps - 1) * (noise.sigma_min ** inv_rho - noise.sigma_max ** inv_rho))
        ** noise.rho
        for i in range(steps)
    ]
    return ladder + [0.0]


def cf_scale(i: int, steps: int) -> float:
    if not 0 <= i <= steps:
        raise DomainError(detail=f"reverse step {i} outside [0, {steps}]")
    return max((steps - i) / steps, 0.3)


def _mixed_denoise(model, x, sigma, cond, uncond, scale, noise) -> torch.Tensor:
    d_cond = _denoise_tensor(model, x, sigma, cond, noise)
    d_uncond = _denoise_tensor(model, x, sigma, uncond, noise)
    return scale * d_cond + (1.0 - scale) * d_uncond


def _euler(x: torch.Tensor, denoised: torch.Tensor, sigma: float, sigma_next: float) -> torch.Tensor:
    if sigma_next == 0.0:
        return denoised
    return x + (sigma_next - sigma) * (x - denoised) / sigma


def _initial_noise(model: ConditionalDenoiser, ladder: list[float], seed: int) -> torch.Tensor:
    generator = torch_generator(seed)
    return ladder[0] * torch.randn((1, 1, model.frame_size, model.frame_size), generator=generator)


def _run_ladder(model, x, ladder, cond, uncond, noise, start: int, scale_fn) -> torch.Tensor:
    steps = len(ladder) - 1
    for rung in range(start, steps):
        i = steps - rung
        x = _euler(x, _mixed_denoise(model, x, ladder[rung], cond, uncond, scale_fn(i), noise),
                   ladder[rung], ladder[rung + 1])
    return x


def sample_conditional(model: ConditionalDenoiser, cond: HistoryWindow, noise: NoiseParams, seed: int,
                       cf_override: float | None = None) -> Frame:
    """Classifier-free reverse ladder from pure noise; `cf_override` pins the guidance scale at every step."""
    ladder = sigma_schedule(noise)
    steps = noise.num_steps
    scale_fn = (lambda i: cf_override) if cf_override is not None else (lambda i: cf_scale(i, steps))
    with torch.no_grad():
        x = _run_ladder(model, _initial_noise(model, ladder, seed), ladder, encode_history(cond, model),
                        encode_history(None, model), noise, 0, scale_fn)
    return to_frame(x.clamp(0.0, 1.0))


def _proposed_output(model, x, ladder, rung, cond, noise) -> torch.Tensor:
    """Clean frame reached by running the remaining purely conditional steps from `x`."""
    with torch.no_grad():
        for r in range(rung, len(ladder) - 1):
            x = _euler(x, _denoise_tensor(model, x, ladder[r], cond, noise), ladder[r], ladder[r + 1])
    return x


def policy_gradient(q: QNetwork, proposed: torch.Tensor, true_values: torch.Tensor, q_floor: float,
                    temperature: float) -> torch.Tensor:
    """Gradient w.r.t. the proposed frame of log sum_a softmax(Q(proposed)/T)_a * Qpos(s_true, a).

    Qpos = softplus(Q - q_floor + 1) keeps the logarithm defined for negative values.
    """
    positive = torch.nn.functional.softplus(true_values - q_floor + 1.0)

    def loss(model, x):
        probs = torch.softmax(model(x)[0] / temperature, dim=-1)
        return torch.log((probs * positive).sum())

    with torch.enable_grad():
        _, g = grad(q, loss, proposed)
    if not torch.isfinite(g).all():
        raise NumericsError(detail=f"{ERROR_NON_FINITE} in policy guidance gradient")
    return g


def guided_sample(model: ConditionalDenoiser, cond: HistoryWindow, q: QNetwork, true_state_frame: Frame,
                  gamma2: float, ae: FrameAutoencoder | None, noise: NoiseParams, seed: int,
                  temperature: float = 0.05, realism_step_size: float = 1.0) -> Frame:
    """Reverse ladder with policy guidance toward low-value actions at the true state and optional realism steps."""
    if gamma2 < 0:
        raise DomainError(detail=f"gamma2 must be >= 0, got {gamma2}")
    ladder = sigma_schedule(noise)
    steps = noise.num_steps
    condition = encode_history(cond, model)
    uncond = encode_history(None, model)

    with torch.no_grad():
        true_values = q(to_batch(np.asarray(true_state_frame, dtype=np.float32)))[0]
    q_floor = float(true_values.min())

    x = _initial_noise(model, ladder, seed)
    for rung in range(steps):
        i = steps - rung
        if gamma2 > 0:
            proposed = _proposed_output(model, x, ladder, rung, condition, noise)
            x = x - gamma2 * policy_gradient(q, proposed, true_values, q_floor, temperature)
        with torch.no_grad():
            x = _euler(x, _mixed_denoise(model, x, ladder[rung], condition, uncond, cf_scale(i, steps), noise),
                       ladder[rung], ladder[rung + 1])
        if ae is not None and i != 1:
            x = x - realism_step_size * realism_gradient(ae, x)
    return to_frame(x.clamp(0.0, 1.0))


def partial_reverse(model: ConditionalDenoiser, observed: Frame, cond: HistoryWindow, sigma_partial: float,
                  noise: NoiseParams, seed: int) -> Frame:
    """Re-noise `observed` to the first rung at or below sigma_partial and run the conditional ladder from there."""
    observed = np.asarray(observed, dtype=np.float32)
    if sigma_partial <= 0:
        return observed.copy()
    ladder = sigma_schedule(noise)
    start = next(r for r, s in enumerate(ladder) if s <= sigma_partial + 1e-12)
    if ladder[start] == 0.0:
        return observed.copy()
    generator = torch_generator(seed)
    x = to_batch(observed) + ladder[start] * torch.randn((1, 1, *observed.shape), generator=generator)
    with torch.no_grad():
        x = _run_ladder(model, x, ladder, encode_history(cond, model), encode_history(None, model), noise, start,
                        lambda i: 1.0)
    return to_frame(x.clamp(0.0, 1.0))
