import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from constants import ERROR_INVALID_CONFIG
from exceptions_handler import ConfigError


class EnvConfig(BaseModel):
    """MiniFreeway parameters: an agent crossing `num_lanes` wrapping car lanes."""

    grid_size: int = 12
    num_lanes: int = 3
    lane_speeds: tuple[int, ...] = (1, -1, 2)
    frame_size: int = 16
    episode_horizon: int = Field(default=64, ge=1)
    discount: float = 0.95
    initial_distribution: str = "bottom-center"

    model_config = ConfigDict(
        frozen=True,
        extra="forbid",
    )

    @model_validator(mode="after")
    def _check_invariants(self) -> "EnvConfig":
        self.check()
        return self

    def check(self) -> None:
        # ConfigError is not a ValueError, so pydantic lets it escape untouched
        problems = []
        if self.grid_size < 3:
            problems.append(f"grid_size must be >= 3, got {self.grid_size}")
        if self.num_lanes < 1 or self.num_lanes > self.grid_size - 2:
            problems.append(f"num_lanes must lie in [1, grid_size - 2], got {self.num_lanes}")
        if len(self.lane_speeds) != self.num_lanes:
            problems.append("lane_speeds needs one entry per lane")
        if any(s == 0 or abs(s) >= self.grid_size for s in self.lane_speeds):
            problems.append("lane speeds must be nonzero with |speed| < grid_size")
        if self.frame_size < self.grid_size:
            problems.append("frame_size must be >= grid_size")
        if not 0.0 <= self.discount < 1.0:
            problems.append("discount must lie in [0, 1)")
        if self.initial_distribution != "bottom-center":
            problems.append(f"unknown initial distribution {self.initial_distribution!r}")
        if problems:
            raise ConfigError(detail=f"{ERROR_INVALID_CONFIG}: {'; '.join(problems)}", problems=problems)

    @property
    def lane_rows(self) -> tuple[int, ...]:
        block = (self.grid_size - 2) // self.num_lanes
        return tuple(1 + j * block + block // 2 for j in range(self.num_lanes))

    @property
    def agent_col(self) -> int:
        return self.grid_size // 2

    @property
    def start_cols(self) -> tuple[int, ...]:
        return tuple((j * self.grid_size) // self.num_lanes for j in range(self.num_lanes))

    @property
    def car_period(self) -> int:
        """Number of ticks after which every lane is back at its start column."""
        period = 1
        for speed in self.lane_speeds:
            lane_period = self.grid_size // math.gcd(self.grid_size, abs(speed))
            period = period * lane_period // math.gcd(period, lane_period)
        return period

    @property
    def grid_offset(self) -> int:
        return (self.frame_size - self.grid_size) // 2
