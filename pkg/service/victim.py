import copy
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from tqdm import tqdm

from configuration.config import get_app_settings
from constants import ERROR_TRAINING_THRESHOLD, LOG_VICTIM_EVAL, LOG_VICTIM_TRAINED
from exceptions_handler import ShapeError, TrainingError
from models.data.env import Action, Frame, NUM_ACTIONS
from models.request.env import EnvConfig
from models.request.training import VictimHyper
from service.envcore import MiniFreeway
from service.networks import QNetwork
from service.nnkit import forward, grad, make_optimizer, optim_step, to_batch
from utils.logger import logger, log_performance
from utils.seeding import seed_everything


class ReplayBuffer:
    """Ring buffer of (frame, action, reward, next frame) transitions."""

    def __init__(self, capacity: int, frame_size: int):
        self.capacity = capacity
        self.ptr = 0
        self.size = 0
        self.frames = np.zeros((capacity, frame_size, frame_size), dtype=np.float32)
        self.next_frames = np.zeros((capacity, frame_size, frame_size), dtype=np.float32)
        self.actions = np.zeros((capacity,), dtype=np.int64)
        self.rewards = np.zeros((capacity,), dtype=np.float32)

    def add(self, frame: Frame, action: int, reward: float, next_frame: Frame) -> None:
        self.frames[self.ptr] = frame
        self.actions[self.ptr] = action
        self.rewards[self.ptr] = reward
        self.next_frames[self.ptr] = next_frame
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch_size)
        return (to_batch(self.frames[idx]), torch.as_tensor(self.actions[idx]),
                torch.as_tensor(self.rewards[idx]), to_batch(self.next_frames[idx]))


@dataclass
class TrainingCurve:
    rows: list[dict[str, float]] = field(default_factory=list)

    def record(self, step: int, loss: float, eval_return: float | None) -> None:
        self.rows.append({"step": step, "loss": loss,
                          "eval_return": float("nan") if eval_return is None else eval_return})


def q_values(q: QNetwork, frame: Frame) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float32)
    if frame.shape != (q.frame_size, q.frame_size):
        raise ShapeError(detail=f"frame of shape {frame.shape} for a {q.frame_size}x{q.frame_size} Q-network")
    return forward(q, to_batch(frame))[0].numpy().astype(np.float64)


def greedy_from_values(values: np.ndarray) -> Action:
    # np.argmax returns the first maximum, so ties go to the lowest index
    return Action(int(np.argmax(values)))


def greedy_action(q: QNetwork, frame: Frame) -> Action:
    return greedy_from_values(q_values(q, frame))


def importance_weight_from_values(values: np.ndarray) -> float:
    return float(np.max(values) - np.min(values))


def importance_weight(q: QNetwork, frame: Frame) -> float:
    """Spread between the best and worst action values at this frame."""
    return importance_weight_from_values(q_values(q, frame))


def evaluate_policy(env: MiniFreeway, q: QNetwork, episodes: int) -> float:
    returns = [env.rollout_return(lambda s: greedy_action(q, env.render(s))) for _ in range(episodes)]
    return float(np.mean(returns))


def _td_loss(gamma: float):
    def loss(model, batch):
        frames, actions, rewards, targets = batch
        chosen = model(frames).gather(1, actions.unsqueeze(1)).squeeze(1)
        return F.smooth_l1_loss(chosen, rewards + gamma * targets)
    return loss


@log_performance(threshold_ms=60_000)
def train_dqn(config: EnvConfig, hyper: VictimHyper, seed: int | None = None,
              show_progress: bool | None = None) -> tuple[QNetwork, TrainingCurve]:
    """Train the victim until its greedy return reaches `success_ratio` of the exact optimum.

    Episode ends are time limits of an otherwise infinite-horizon task, so targets always bootstrap.
    """
    seed = hyper.seed if seed is None else seed
    show_progress = get_app_settings().SHOW_PROGRESS if show_progress is None else show_progress
    seed_everything(seed)
    rng = np.random.default_rng(seed)

    env = MiniFreeway(config)
    _, optimal = env.value_iteration()
    threshold = hyper.success_ratio * optimal if optimal > 0 else optimal

    q = QNetwork(frame_size=config.frame_size, hidden=hyper.hidden, num_actions=NUM_ACTIONS)
    target = copy.deepcopy(q)
    opt = make_optimizer(q, hyper.learning_rate)
    buffer = ReplayBuffer(hyper.replay_size, config.frame_size)
    curve = TrainingCurve()
    loss_fn = _td_loss(config.discount)

    state = env.reset()
    frame = env.render(state)
    last_loss = float("nan")
    for step in tqdm(range(1, hyper.total_steps + 1), desc="victim", disable=not show_progress):
        frac = min(1.0, step / hyper.eps_decay_steps)
        eps = hyper.eps_start + frac * (hyper.eps_end - hyper.eps_start)
        if rng.random() < eps:
            action = Action(int(rng.integers(NUM_ACTIONS)))
        else:
            action = greedy_action(q, frame)
        state, reward, done = env.step(state, action)
        next_frame = env.render(state)
        buffer.add(frame, action, reward, next_frame)
        frame = next_frame
        if done:
            state = env.reset()
            frame = env.render(state)

        if step >= hyper.learning_starts and buffer.size >= hyper.batch_size:
            frames, actions, rewards, next_frames = buffer.sample(hyper.batch_size, rng)
            with torch.no_grad():
                bootstrap = target(next_frames).max(dim=1).values
            param_grads, _ = grad(q, loss_fn, (frames, actions, rewards, bootstrap))
            with torch.no_grad():
                last_loss = float(loss_fn(q, (frames, actions, rewards, bootstrap)))
            optim_step(q, param_grads, opt)
            opt.history.append(last_loss)

        if step % hyper.target_sync == 0:
            target.load_state_dict(q.state_dict())

        if step % hyper.eval_every == 0:
            q.eval()
            eval_return = evaluate_policy(env, q, hyper.eval_episodes)
            q.train()
            curve.record(step, last_loss, eval_return)
            logger.info(LOG_VICTIM_EVAL, extra={"step": step, "eval_return": eval_return, "target": threshold})
            if eval_return >= threshold:
                q.eval()
                logger.info(LOG_VICTIM_TRAINED, extra={"step": step, "eval_return": eval_return,
                                                       "optimal_return": optimal})
                return q, curve

    q.eval()
    final = evaluate_policy(env, q, hyper.eval_episodes)
    curve.record(hyper.total_steps, last_loss, final)
    if final >= threshold:
        logger.info(LOG_VICTIM_TRAINED, extra={"step": hyper.total_steps, "eval_return": final,
                                               "optimal_return": optimal})
        return q, curve
    raise TrainingError(detail=f"{ERROR_TRAINING_THRESHOLD}: victim return {final:.2f} < {threshold:.2f}",
                        curve=curve.rows)
