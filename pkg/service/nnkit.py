"""
Contract shared by every trainable network in the lab: checked forward
evaluation, parameter and input gradients, Adam updates and checkpoint I/O.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import torch
from safetensors import SafetensorError, safe_open
from safetensors.torch import save_file
from torch import nn

from constants import CHECKPOINT_FORMAT_VERSION, ERROR_CORRUPT_FILE, ERROR_NON_FINITE, ERROR_SHAPE_MISMATCH
from exceptions_handler import FormatError, NumericsError, ShapeError

_ARCHITECTURES: dict[str, type["LabModule"]] = {}


def register_architecture(kind: str):
    def decorator(cls):
        cls.kind = kind
        _ARCHITECTURES[kind] = cls
        return cls
    return decorator


class LabModule(nn.Module):
    """A module that can describe itself well enough to be rebuilt from a checkpoint."""

    kind: str = "abstract"

    def __init__(self, **arch: Any):
        super().__init__()
        self.arch = arch

    @property
    def input_shape(self) -> tuple[int, ...]:
        raise NotImplementedError

    def architecture(self) -> dict[str, Any]:
        return {"kind": self.kind, "kwargs": self.arch}

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def build_model(descriptor: dict[str, Any]) -> LabModule:
    kind = descriptor.get("kind")
    if kind not in _ARCHITECTURES:
        raise FormatError(detail=f"{ERROR_CORRUPT_FILE}: unknown architecture {kind!r}")
    return _ARCHITECTURES[kind](**descriptor.get("kwargs", {}))


def check_input(model: LabModule, x: torch.Tensor) -> None:
    expected = tuple(model.input_shape)
    if tuple(x.shape[-len(expected):]) != expected or x.dim() not in (len(expected), len(expected) + 1):
        raise ShapeError(detail=f"{ERROR_SHAPE_MISMATCH}: expected (*, {expected}), got {tuple(x.shape)}")


def forward(model: LabModule, x: torch.Tensor, **kwargs: Any) -> torch.Tensor:
    check_input(model, x)
    with torch.no_grad():
        out = model(x, **kwargs)
    if not torch.isfinite(out).all():
        raise NumericsError(detail=f"{ERROR_NON_FINITE} in {model.kind} output")
    return out


def grad(model: nn.Module, loss: Callable[[nn.Module, Any], torch.Tensor],
         batch: Any) -> tuple[dict[str, torch.Tensor], torch.Tensor | None]:
    """Gradients of a scalar loss w.r.t. every parameter and the batch input.

    When `batch` is a tuple its first element is the differentiated input.
    """
    if isinstance(batch, tuple):
        inputs = batch[0].detach().clone().requires_grad_(True)
        batch = (inputs, *batch[1:])
    else:
        inputs = batch.detach().clone().requires_grad_(True)
        batch = inputs

    value = loss(model, batch)
    if value.dim() != 0:
        raise ShapeError(detail=f"loss must be a scalar, got shape {tuple(value.shape)}")
    if not torch.isfinite(value):
        raise NumericsError(detail=f"{ERROR_NON_FINITE} loss: {value.item()}")

    named = list(model.named_parameters())
    names = [name for name, _ in named]
    params = [p for _, p in named]
    if not value.requires_grad:
        return {name: torch.zeros_like(p) for name, p in named}, torch.zeros_like(inputs)
    grads = torch.autograd.grad(value, [*params, inputs], allow_unused=True)
    param_grads = {
        name: torch.zeros_like(p) if g is None else g
        for name, p, g in zip(names, params, grads[:-1])
    }
    input_grad = torch.zeros_like(inputs) if grads[-1] is None else grads[-1]
    return param_grads, input_grad


@dataclass
class OptimState:
    """Adam moments live inside the torch optimizer; the rest is bookkeeping for logs."""

    optimizer: torch.optim.Optimizer
    learning_rate: float
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    step_count: int = 0
    history: list[float] = field(default_factory=list)


def make_optimizer(model: nn.Module, learning_rate: float = 1e-3,
                   betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> OptimState:
    optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate, betas=betas, eps=eps)
    return OptimState(optimizer=optimizer, learning_rate=learning_rate, betas=betas, eps=eps)


def optim_step(model: nn.Module, grads: dict[str, torch.Tensor],
               opt: OptimState) -> tuple[nn.Module, OptimState]:
    for name, param in model.named_parameters():
        g = grads.get(name)
        if g is None or g.shape != param.shape:
            raise ShapeError(detail=f"{ERROR_SHAPE_MISMATCH}: gradient for {name!r} "
                                    f"has shape {None if g is None else tuple(g.shape)}, expected {tuple(param.shape)}")
        param.grad = g.detach().clone()
    opt.optimizer.step()
    opt.optimizer.zero_grad(set_to_none=True)
    opt.step_count += 1
    return model, opt


def save_model(model: LabModule, path: Path, config_hash: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensors = {name: t.detach().contiguous().cpu() for name, t in model.state_dict().items()}
    metadata = {
        "format_version": str(CHECKPOINT_FORMAT_VERSION),
        "architecture": json.dumps(model.architecture(), sort_keys=True),
        "config_hash": config_hash,
    }
    save_file(tensors, str(path), metadata=metadata)
    return path


def read_metadata(path: Path) -> dict[str, str]:
    try:
        with safe_open(str(path), framework="pt") as fh:
            return dict(fh.metadata() or {})
    except (SafetensorError, OSError, ValueError) as e:
        raise FormatError(detail=f"{ERROR_CORRUPT_FILE}: {path}: {e}") from e


def load_model(path: Path) -> LabModule:
    path = Path(path)
    metadata = read_metadata(path)
    version = metadata.get("format_version")
    if version != str(CHECKPOINT_FORMAT_VERSION):
        raise FormatError(detail=f"{ERROR_CORRUPT_FILE}: checkpoint format version {version!r}, "
                                 f"expected {CHECKPOINT_FORMAT_VERSION}", version=version)
    try:
        model = build_model(json.loads(metadata["architecture"]))
        with safe_open(str(path), framework="pt") as fh:
            state = {name: fh.get_tensor(name) for name in fh.keys()}
        model.load_state_dict(state)
    except (SafetensorError, OSError, ValueError, KeyError, RuntimeError) as e:
        raise FormatError(detail=f"{ERROR_CORRUPT_FILE}: {path}: {e}") from e
    model.eval()
    return model


def to_batch(frames) -> torch.Tensor:
    """(F, F) or (B, F, F) frames -> float32 tensor of shape (B, 1, F, F)."""
    array = torch.as_tensor(frames, dtype=torch.float32)
    if array.dim() == 2:
        array = array.unsqueeze(0)
    return array.unsqueeze(1)


def to_frame(x: torch.Tensor):
    return x.detach().reshape(x.shape[-2], x.shape[-1]).cpu().numpy().astype("float32")
