from dataclasses import dataclass, field

import numpy as np

from models.data.env import Action, EnvState, Frame
from models.request.env import EnvConfig


@dataclass
class TrajectoryStep:
    t: int
    true_state: EnvState
    observed: Frame
    action: Action
    reward: float
    attacked: bool
    metrics: dict[str, float] = field(default_factory=dict)

    def to_dict(self, frame_ref: int):
        """Convert step to dictionary for serialization; the frame lives in the sidecar"""
        return {
            "t": self.t,
            "true_state": self.true_state.to_dict(),
            "observed_frame_ref": frame_ref,
            "action": int(self.action),
            "reward": self.reward,
            "attacked": self.attacked,
            "metrics": self.metrics,
        }


@dataclass
class TrajectoryLog:
    env: EnvConfig
    attack: str = "none"
    defense: str = "none"
    seed: int = 0
    episode: int = 0
    config_hash: str = ""
    steps: list[TrajectoryStep] = field(default_factory=list)

    def append(self, step: TrajectoryStep) -> None:
        self.steps.append(step)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]

    @property
    def observed_frames(self) -> np.ndarray:
        return np.stack([s.observed for s in self.steps]) if self.steps else np.zeros((0,))

    def metric_series(self, name: str) -> list[float]:
        return [s.metrics[name] for s in self.steps if name in s.metrics]

    @property
    def attacked_fraction(self) -> float:
        return sum(s.attacked for s in self.steps) / len(self.steps) if self.steps else 0.0
