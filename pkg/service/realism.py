import numpy as np
import torch
from tqdm import tqdm

from configuration.config import get_app_settings
from constants import ERROR_NON_FINITE, ERROR_TRAINING_THRESHOLD, LOG_AE_TRAINED
from exceptions_handler import NumericsError, ShapeError, TrainingError
from models.data.env import Frame
from models.request.training import AEHyper
from service.networks import FrameAutoencoder
from service.nnkit import forward, grad, make_optimizer, optim_step, to_batch, to_frame
from utils.logger import logger, log_performance
from utils.seeding import seed_everything


def _reconstruction_loss(model, x):
    return torch.linalg.vector_norm(x - model(x), dim=(-2, -1)).mean()


def realism_gradient(ae: FrameAutoencoder, x: torch.Tensor) -> torch.Tensor:
    """Input gradient of the reconstruction error, usable on noisy intermediate iterates."""
    with torch.enable_grad():
        _, input_grad = grad(ae, _reconstruction_loss, x)
    if not torch.isfinite(input_grad).all():
        raise NumericsError(detail=f"{ERROR_NON_FINITE} in realism gradient")
    return input_grad


def reconstruction_error(ae: FrameAutoencoder, frame: Frame) -> float:
    frame = np.asarray(frame, dtype=np.float32)
    if frame.shape != (ae.frame_size, ae.frame_size):
        raise ShapeError(detail=f"frame of shape {frame.shape} for a {ae.frame_size}x{ae.frame_size} autoencoder")
    x = to_batch(frame)
    return float(torch.linalg.vector_norm(x - forward(ae, x)))


def reconstruction_errors(ae: FrameAutoencoder, frames: np.ndarray) -> np.ndarray:
    if len(frames) == 0:
        return np.zeros(0)
    x = to_batch(np.asarray(frames, dtype=np.float32))
    return torch.linalg.vector_norm(x - forward(ae, x), dim=(-3, -2, -1)).numpy().astype(np.float64)


def realism_step(ae: FrameAutoencoder, frame: Frame, step_size: float = 1.0, clamp: bool = True) -> Frame:
    """One gradient descent step on the reconstruction error of `frame`."""
    if reconstruction_error(ae, frame) == 0.0:
        return np.asarray(frame, dtype=np.float32).copy()
    x = to_batch(np.asarray(frame, dtype=np.float32))
    x = x - step_size * realism_gradient(ae, x)
    if clamp:
        x = x.clamp(0.0, 1.0)
    return to_frame(x)


@log_performance(threshold_ms=60_000)
def train_autoencoder(frames: np.ndarray, hyper: AEHyper, seed: int | None = None,
                      held_out: np.ndarray | None = None,
                      show_progress: bool | None = None) -> tuple[FrameAutoencoder, list[dict[str, float]]]:
    """Fit the autoencoder on clean frames; the held-out mean error must end below `clean_threshold`."""
    seed = hyper.seed if seed is None else seed
    show_progress = get_app_settings().SHOW_PROGRESS if show_progress is None else show_progress
    seed_everything(seed)
    generator = torch.Generator().manual_seed(seed)

    frames = np.asarray(frames, dtype=np.float32)
    if held_out is None:
        split = max(1, len(frames) // 10)
        frames, held_out = frames[split:], frames[:split]
    data = to_batch(frames)

    ae = FrameAutoencoder(frame_size=frames.shape[-1], hidden=hyper.hidden, bottleneck=hyper.bottleneck)
    opt = make_optimizer(ae, hyper.learning_rate)
    curve = []
    held_error = float("inf")
    for epoch in tqdm(range(hyper.epochs), desc="autoencoder", disable=not show_progress):
        order = torch.randperm(len(data), generator=generator)
        losses = []
        for start in range(0, len(data), hyper.batch_size):
            batch = data[order[start:start + hyper.batch_size]]
            param_grads, _ = grad(ae, _reconstruction_loss, batch)
            with torch.no_grad():
                losses.append(float(_reconstruction_loss(ae, batch)))
            optim_step(ae, param_grads, opt)
        ae.eval()
        held_error = float(reconstruction_errors(ae, held_out).mean())
        ae.train()
        curve.append({"epoch": epoch, "loss": float(np.mean(losses)), "held_out_error": held_error})

    ae.eval()
    if held_error > hyper.clean_threshold:
        raise TrainingError(detail=f"{ERROR_TRAINING_THRESHOLD}: held-out reconstruction error "
                                   f"{held_error:.3f} > {hyper.clean_threshold}", curve=curve)
    logger.info(LOG_AE_TRAINED, extra={"epochs": hyper.epochs, "held_out_error": held_error})
    return ae, curve
