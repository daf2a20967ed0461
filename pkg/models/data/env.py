from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np
from numpy.typing import NDArray

# H x W grayscale image in [0, 1]
Frame = NDArray[np.float32]


class Action(IntEnum):
    UP = 0
    DOWN = 1
    STAY = 2


NUM_ACTIONS = len(Action)


@dataclass(frozen=True, order=True)
class EnvState:
    agent_row: int
    car_cols: tuple[int, ...]
    tick: int = 0

    def with_tick(self, tick: int) -> "EnvState":
        return replace(self, tick=tick)

    def to_dict(self):
        """Convert state to dictionary for serialization"""
        return {
            "agent_row": self.agent_row,
            "car_cols": list(self.car_cols),
            "tick": self.tick,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnvState":
        return cls(agent_row=int(data["agent_row"]), car_cols=tuple(int(c) for c in data["car_cols"]),
                   tick=int(data["tick"]))

    def pack(self) -> list[int]:
        return [self.agent_row, self.tick, *self.car_cols]

    @classmethod
    def unpack(cls, record) -> "EnvState":
        return cls(agent_row=int(record[0]), tick=int(record[1]), car_cols=tuple(int(c) for c in record[2:]))
