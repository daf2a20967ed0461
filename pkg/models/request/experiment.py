from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator

from exceptions_handler import ConfigError
from models.request.attack import (AttackConfig, AttackVariant, DefenseConfig, DefenseKind, DetectorConfig,
                                   StealthThresholds)
from models.request.diffusion import DiffusionHyper, NoiseParams
from models.request.env import EnvConfig
from models.request.training import AEHyper, VictimHyper


def default_attacks() -> list[AttackConfig]:
    return [
        AttackConfig(variant=AttackVariant.NONE),
        AttackConfig(variant=AttackVariant.PGD, epsilon=15 / 255),
        AttackConfig(variant=AttackVariant.MINBEST, epsilon=15 / 255),
        AttackConfig(variant=AttackVariant.ROTATE, degrees=1.0),
        AttackConfig(variant=AttackVariant.TRANSFORM, shift=(1, 0)),
        AttackConfig(variant=AttackVariant.SHIFT_O),
        AttackConfig(variant=AttackVariant.SHIFT_I),
    ]


class EvaluationConfig(BaseModel):
    episodes_per_seed: int = Field(default=1, ge=1)
    run_ablations: bool = True
    gamma2_grid: tuple[float, ...] = (0.0, 1.0, 2.0, 4.0)
    run_frequency_study: bool = True
    frequency_grid: tuple[float, ...] = (0.15, 0.25, 0.5, 1.0)

    model_config = ConfigDict(frozen=True, extra="forbid")


class ExperimentConfig(BaseModel):
    env: EnvConfig = EnvConfig()
    victim: VictimHyper = VictimHyper()
    noise: NoiseParams = NoiseParams()
    diffusion: DiffusionHyper = DiffusionHyper()
    ae: AEHyper = AEHyper()
    attacks: list[AttackConfig] = Field(default_factory=default_attacks)
    defenses: list[DefenseKind] = [DefenseKind.NONE, DefenseKind.PURIFIER]
    defense: DefenseConfig = DefenseConfig()
    detector: DetectorConfig = DetectorConfig()
    thresholds: StealthThresholds = StealthThresholds()
    evaluation: EvaluationConfig = EvaluationConfig()
    seeds: list[int] = Field(default_factory=lambda: list(range(10)))
    output_dir: Path | None = None

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("seeds")
    @classmethod
    def _seeds_nonempty(cls, seeds: list[int]) -> list[int]:
        if not seeds:
            raise ConfigError(detail="seed list must not be empty")
        return seeds

    def attack_named(self, name: str) -> AttackConfig:
        for attack in self.attacks:
            if attack.name == name:
                return attack
        raise ConfigError(detail=f"unknown attack {name!r}", known=[a.name for a in self.attacks])
