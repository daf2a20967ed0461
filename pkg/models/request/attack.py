from enum import Enum

from pydantic import BaseModel, ConfigDict, Field


class AttackVariant(str, Enum):
    SHIFT_O = "shift-o"
    SHIFT_I = "shift-i"
    PGD = "pgd"
    MINBEST = "minbest"
    ROTATE = "rotate"
    TRANSFORM = "transform"
    NONE = "none"


class DefenseKind(str, Enum):
    NONE = "none"
    PURIFIER = "purifier"


class AttackConfig(BaseModel):
    variant: AttackVariant = AttackVariant.NONE
    label: str | None = None
    xi: float = Field(default=1.0, ge=0, le=1)
    gamma2: float = Field(default=2.0, ge=0)
    use_realism: bool = True
    policy_temperature: float = Field(default=0.05, gt=0)
    epsilon: float = Field(default=15 / 255, ge=0)
    iters: int = Field(default=10, ge=0)
    degrees: float = Field(default=1.0, ge=-45, le=45)
    shift: tuple[int, int] = (1, 0)
    seed: int = 0

    model_config = ConfigDict(frozen=True, extra="forbid")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.variant in (AttackVariant.PGD, AttackVariant.MINBEST):
            return f"{self.variant.value}-{round(self.epsilon * 255)}"
        return self.variant.value

    @property
    def is_shift(self) -> bool:
        return self.variant in (AttackVariant.SHIFT_O, AttackVariant.SHIFT_I)


class DefenseConfig(BaseModel):
    # None picks the second rung of the inference ladder
    sigma_partial: float | None = Field(default=None, ge=0)

    model_config = ConfigDict(frozen=True, extra="forbid")


class DetectorConfig(BaseModel):
    mad_threshold: float = Field(default=5.0, ge=0)
    cusum_drift: float = Field(default=1.5, gt=0)
    cusum_threshold: float = Field(default=3.0, gt=0)
    window: int = Field(default=3, ge=1)
    # lower bound on the MAD, as a fraction of the clean median
    mad_floor_ratio: float = Field(default=0.05, ge=0)

    model_config = ConfigDict(frozen=True, extra="forbid")


class StealthThresholds(BaseModel):
    """Realism (delta1) and faithfulness (delta2) bounds; None means calibrate from clean data."""

    delta1: float | None = Field(default=None, gt=0)
    delta2: float | None = Field(default=None, gt=0)

    model_config = ConfigDict(frozen=True, extra="forbid")
