import time
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from scipy import ndimage

from constants import ERROR_COLD_HISTORY, LOG_EPISODE_DONE
from exceptions_handler import DomainError, WarmupError
from models.data.env import Action, EnvState, Frame
from models.data.history import HistoryWindow
from models.data.trajectory import TrajectoryLog, TrajectoryStep
from models.request.attack import AttackConfig, AttackVariant, DefenseConfig, DefenseKind
from models.request.diffusion import NoiseParams
from service.defense import purify
from service.diffusion import guided_sample, sample_conditional
from service.envcore import MiniFreeway
from service.networks import ConditionalDenoiser, FrameAutoencoder, QNetwork
from service.nnkit import grad, to_batch, to_frame
from service.victim import greedy_action, importance_weight
from utils.logger import logger, log_performance
from utils.seeding import derive_seed
from utils.telemetry import attacked_steps_counter, episodes_counter, generation_time_histogram


@dataclass
class AttackState:
    """Per-episode attacker bookkeeping."""

    k: int
    importance_history: list[float] = field(default_factory=list)
    attacks_so_far: int = 0
    imagined_history: HistoryWindow | None = None
    true_history: HistoryWindow | None = None

    def __post_init__(self):
        self.imagined_history = self.imagined_history or HistoryWindow.empty(self.k)
        self.true_history = self.true_history or HistoryWindow.empty(self.k)

    def record(self, true_frame: Frame, observed: Frame, action: Action) -> None:
        self.true_history = self.true_history.push(true_frame, action)
        self.imagined_history = self.imagined_history.push(observed, action)


@dataclass
class AttackModels:
    q: QNetwork
    noise: NoiseParams
    denoiser: ConditionalDenoiser | None = None
    ae: FrameAutoencoder | None = None


def should_attack(st: AttackState, omega: float, t: int, xi: float) -> bool:
    """Attack when omega is in the top xi of this episode's weights so far and the budget allows it.

    The current weight is part of the history it is ranked against; the first k steps never attack.
    """
    st.importance_history.append(omega)
    if t < st.k or xi <= 0.0:
        return False
    threshold = float(np.quantile(st.importance_history, 1.0 - xi))
    return omega >= threshold and st.attacks_so_far < t * xi


def shift_step(st: AttackState, true_state: EnvState, attack: bool, cfg: AttackConfig, env: MiniFreeway,
               models: AttackModels, seed: int) -> Frame:
    """Observation produced by SHIFT-O or SHIFT-I for this step."""
    true_frame = env.render(true_state)
    if cfg.variant == AttackVariant.SHIFT_O:
        if not attack:
            return true_frame
        history = st.true_history
    else:
        history = st.imagined_history
    if not history.is_full and not attack:
        return true_frame
    if not history.is_full:
        raise WarmupError(detail=f"{ERROR_COLD_HISTORY}: {len(history.frames)}/{st.k} pairs")

    if cfg.variant == AttackVariant.SHIFT_I and not attack:
        return sample_conditional(models.denoiser, history, models.noise, seed)
    if cfg.variant == AttackVariant.SHIFT_I:
        history = history.with_null_last()
    ae = models.ae if cfg.use_realism else None
    return guided_sample(models.denoiser, history, models.q, true_frame, cfg.gamma2, ae, models.noise, seed,
                         temperature=cfg.policy_temperature)


def _project(x: torch.Tensor, origin: torch.Tensor, epsilon: float) -> torch.Tensor:
    return torch.clamp(origin + torch.clamp(x - origin, -epsilon, epsilon), 0.0, 1.0)


def pgd_attack(q: QNetwork, frame: Frame, epsilon: float, iters: int) -> Frame:
    """Sign-gradient ascent on the cross-entropy against the clean greedy action."""
    if epsilon < 0:
        raise DomainError(detail=f"epsilon must be >= 0, got {epsilon}")
    frame = np.asarray(frame, dtype=np.float32)
    if epsilon == 0 or iters == 0:
        return frame.copy()
    origin = to_batch(frame)
    label = torch.tensor([int(greedy_action(q, frame))])
    alpha = epsilon / 4

    def loss(model, x):
        return F.cross_entropy(model(x), label)

    x = origin.clone()
    for _ in range(iters):
        _, g = grad(q, loss, x)
        x = _project(x + alpha * g.sign(), origin, epsilon)
    return to_frame(x)


def minbest_attack(q: QNetwork, frame: Frame, epsilon: float, iters: int) -> Frame:
    """Sign-gradient descent on the value of the clean best action."""
    if epsilon < 0:
        raise DomainError(detail=f"epsilon must be >= 0, got {epsilon}")
    frame = np.asarray(frame, dtype=np.float32)
    if epsilon == 0 or iters == 0:
        return frame.copy()
    origin = to_batch(frame)
    best = int(greedy_action(q, frame))
    alpha = epsilon / 4

    def loss(model, x):
        return model(x)[0, best]

    x = origin.clone()
    for _ in range(iters):
        _, g = grad(q, loss, x)
        x = _project(x - alpha * g.sign(), origin, epsilon)
    return to_frame(x)


def rotate_attack(frame: Frame, degrees: float) -> Frame:
    if abs(degrees) > 45:
        raise DomainError(detail=f"rotation of {degrees} degrees exceeds 45")
    frame = np.asarray(frame, dtype=np.float32)
    if degrees == 0:
        return frame.copy()
    rotated = ndimage.rotate(frame, degrees, reshape=False, order=1, mode="constant", cval=0.0)
    return np.clip(rotated, 0.0, 1.0).astype(np.float32)


def transform_attack(frame: Frame, dx: int, dy: int) -> Frame:
    frame = np.asarray(frame, dtype=np.float32)
    if abs(dx) >= frame.shape[1] or abs(dy) >= frame.shape[0]:
        raise DomainError(detail=f"shift ({dx}, {dy}) does not fit a {frame.shape} frame")
    shifted = ndimage.shift(frame, (dy, dx), order=0, mode="constant", cval=0.0)
    return np.clip(shifted, 0.0, 1.0).astype(np.float32)


def perturb(st: AttackState, true_state: EnvState, attack: bool, cfg: AttackConfig, env: MiniFreeway,
            models: AttackModels, seed: int) -> Frame:
    if cfg.is_shift:
        return shift_step(st, true_state, attack, cfg, env, models, seed)
    true_frame = env.render(true_state)
    if not attack:
        return true_frame
    match cfg.variant:
        case AttackVariant.PGD:
            return pgd_attack(models.q, true_frame, cfg.epsilon, cfg.iters)
        case AttackVariant.MINBEST:
            return minbest_attack(models.q, true_frame, cfg.epsilon, cfg.iters)
        case AttackVariant.ROTATE:
            return rotate_attack(true_frame, cfg.degrees)
        case AttackVariant.TRANSFORM:
            return transform_attack(true_frame, *cfg.shift)
    return true_frame


@log_performance(threshold_ms=30_000)
def run_episode(env: MiniFreeway, cfg: AttackConfig, models: AttackModels, seed: int, episode: int = 0,
                defense: DefenseKind = DefenseKind.NONE, defense_cfg: DefenseConfig | None = None,
                k: int = 4, config_hash: str = "") -> TrajectoryLog:
    """Play one episode with the victim acting on (possibly perturbed, possibly purified) observations.

    The log keeps the attacker's output as the observed frame and the executed action.
    """
    defense_cfg = defense_cfg or DefenseConfig()
    log = TrajectoryLog(env=env.config, attack=cfg.name, defense=defense.value, seed=seed, episode=episode,
                        config_hash=config_hash)
    st = AttackState(k=k)
    state = env.reset()
    done = False
    t = 0
    while not done:
        true_frame = env.render(state)
        omega = importance_weight(models.q, true_frame)
        xi = cfg.xi if cfg.variant != AttackVariant.NONE else 0.0
        attack = should_attack(st, omega, t, xi)
        step_seed = derive_seed(cfg.seed, seed, episode, t)

        started = time.perf_counter()
        observed = perturb(st, state, attack, cfg, env, models, step_seed)
        elapsed_ms = (time.perf_counter() - started) * 1000

        victim_input = observed
        if defense == DefenseKind.PURIFIER and st.imagined_history.is_full:
            victim_input = purify(models.denoiser, observed, st.imagined_history, defense_cfg.sigma_partial,
                                  models.noise, derive_seed(step_seed, 1))
        action = greedy_action(models.q, victim_input)
        next_state, reward, done = env.step(state, action)

        metrics = {"omega": omega}
        if attack:
            st.attacks_so_far += 1
            metrics["generation_ms"] = elapsed_ms
            attacked_steps_counter.add(1, {"attack": cfg.name})
            generation_time_histogram.record(elapsed_ms, {"attack": cfg.name})
        log.append(TrajectoryStep(t=t, true_state=state, observed=observed, action=action, reward=reward,
                                  attacked=attack, metrics=metrics))
        st.record(true_frame, observed, action)
        state = next_state
        t += 1

    episodes_counter.add(1, {"attack": cfg.name, "defense": defense.value})
    logger.debug(LOG_EPISODE_DONE, extra={"attack": cfg.name, "defense": defense.value, "seed": seed,
                                          "reward": sum(log.rewards), "attacked_fraction": log.attacked_fraction})
    return log
