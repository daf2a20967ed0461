from pydantic import BaseModel, ConfigDict, Field


class VictimHyper(BaseModel):
    hidden: tuple[int, ...] = (256, 128)
    total_steps: int = Field(default=40_000, ge=1)
    learning_starts: int = Field(default=1_000, ge=0)
    replay_size: int = Field(default=20_000, ge=1)
    batch_size: int = Field(default=64, ge=1)
    target_sync: int = Field(default=500, ge=1)
    learning_rate: float = Field(default=1e-3, ge=0)
    eps_start: float = Field(default=1.0, ge=0, le=1)
    eps_end: float = Field(default=0.05, ge=0, le=1)
    eps_decay_steps: int = Field(default=15_000, ge=1)
    eval_every: int = Field(default=2_000, ge=1)
    eval_episodes: int = Field(default=10, ge=1)
    success_ratio: float = Field(default=0.9, ge=0)
    seed: int = 0

    model_config = ConfigDict(frozen=True, extra="forbid")


class AEHyper(BaseModel):
    hidden: int = Field(default=128, ge=1)
    bottleneck: int = Field(default=32, ge=1)
    epochs: int = Field(default=60, ge=1)
    batch_size: int = Field(default=128, ge=1)
    learning_rate: float = Field(default=1e-3, ge=0)
    dataset_episodes: int = Field(default=100, ge=2)
    clean_threshold: float = Field(default=0.5, gt=0)
    step_size: float = Field(default=1.0, ge=0)
    seed: int = 0

    model_config = ConfigDict(frozen=True, extra="forbid")
