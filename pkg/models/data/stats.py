from dataclasses import dataclass

import numpy as np

from models.data.env import Action, EnvState


@dataclass(frozen=True)
class CleanStats:
    median: float
    mad: float
    count: int
    source_hash: str = ""

    def to_dict(self):
        return {"median": self.median, "mad": self.mad, "count": self.count, "source_hash": self.source_hash}


@dataclass
class QTable:
    """Exact action values over the enumerated valid states."""

    states: list[EnvState]
    values: np.ndarray
    index: dict[EnvState, int]

    def q(self, state: EnvState) -> np.ndarray:
        return self.values[self.index[state]]

    def greedy(self, state: EnvState) -> Action:
        return Action(int(np.argmax(self.q(state))))
