from pydantic import BaseModel, ConfigDict, Field, model_validator

from exceptions_handler import ConfigError


class NoiseParams(BaseModel):
    sigma_data: float = Field(default=0.5, gt=0)
    p_mean: float = -0.4
    p_std: float = Field(default=1.2, gt=0)
    num_steps: int = Field(default=5, ge=1)
    sigma_min: float = 0.02
    sigma_max: float = 5.0
    rho: float = Field(default=7.0, gt=0)

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _check_ladder(self) -> "NoiseParams":
        if not 0 < self.sigma_min < self.sigma_max:
            raise ConfigError(detail="noise ladder needs 0 < sigma_min < sigma_max")
        return self


class DiffusionHyper(BaseModel):
    history_len: int = Field(default=4, ge=1)
    hidden: int = Field(default=128, ge=8)
    action_embed: int = Field(default=8, ge=1)
    noise_embed: int = Field(default=16, ge=2)
    drop_rate: float = Field(default=0.1, ge=0, le=1)
    null_action_rate: float = Field(default=0.1, ge=0, le=1)
    batch_size: int = Field(default=128, ge=1)
    train_steps: int = Field(default=6000, ge=1)
    learning_rate: float = Field(default=1e-3, ge=0)
    dataset_episodes: int = Field(default=200, ge=1)
    behavior_epsilon: float = Field(default=0.5, ge=0, le=1)
    seed: int = 0

    model_config = ConfigDict(frozen=True, extra="forbid")


class GaussianToyConfig(BaseModel):
    """One-dimensional linear-Gaussian chain used to check the guided reverse step analytically."""

    betas: tuple[float, ...] = tuple(0.02 + 0.18 * i / 19 for i in range(20))
    data_mean: float = 0.3
    data_var: float = Field(default=0.0025, gt=0)
    q_slope: float = 2.0

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _check_betas(self) -> "GaussianToyConfig":
        if not self.betas or any(not 0.0 < b < 1.0 for b in self.betas):
            raise ConfigError(detail="every beta must lie in (0, 1)")
        return self
