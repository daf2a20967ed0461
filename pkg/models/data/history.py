from dataclasses import dataclass, field

import numpy as np

from exceptions_handler import StateError
from models.data.env import Action, Frame


@dataclass(frozen=True)
class HistoryWindow:
    """The last k (frame, action) pairs; only the most recent action may be None (dropped)."""

    k: int
    frames: tuple[Frame, ...] = field(default=())
    actions: tuple[Action | None, ...] = field(default=())

    def __post_init__(self):
        if len(self.frames) != len(self.actions):
            raise StateError(detail="history frames and actions must have equal length")
        if len(self.frames) > self.k:
            raise StateError(detail=f"history holds {len(self.frames)} pairs but k={self.k}")
        if any(a is None for a in self.actions[:-1]):
            raise StateError(detail="only the last history action may be dropped")

    @classmethod
    def empty(cls, k: int) -> "HistoryWindow":
        return cls(k=k)

    @property
    def is_full(self) -> bool:
        return len(self.frames) == self.k

    def push(self, frame: Frame, action: Action) -> "HistoryWindow":
        if self.actions and self.actions[-1] is None:
            raise StateError(detail="cannot extend a history whose last action was dropped")
        frames = (*self.frames, np.asarray(frame, dtype=np.float32))[-self.k:]
        actions = (*self.actions, Action(action))[-self.k:]
        return HistoryWindow(k=self.k, frames=frames, actions=actions)

    def with_null_last(self) -> "HistoryWindow":
        if not self.actions:
            return self
        return HistoryWindow(k=self.k, frames=self.frames, actions=(*self.actions[:-1], None))
