import hashlib
import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from functools import lru_cache
from pathlib import Path

from pydantic import BaseModel, ValidationError
from pydantic_settings import BaseSettings

from constants import ERROR_INVALID_CONFIG
from exceptions_handler import ConfigError
from models.request.experiment import ExperimentConfig


class Environment(str, Enum):
    DEVELOPMENT = "development"
    PRODUCTION = "production"
    TESTING = "testing"


class AppSettings(BaseSettings):
    ENVIRONMENT: Environment = Environment.DEVELOPMENT
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"
    SHOW_PROGRESS: bool = True

    # Racine par défaut des sorties de la CLI
    SHIFTLAB_OUTPUT_ROOT: Path = Path("runs")

    # Paramètres OpenTelemetry
    OTLP_ENDPOINT: str | None = None  # pas d'export sans endpoint
    OTEL_SERVICE_NAME: str = "shiftlab"

    model_config = {
        "env_file": os.getcwd() + '/.env',
        "case_sensitive": True,
        "extra": "ignore",
    }


@lru_cache
def get_app_settings() -> AppSettings:
    return AppSettings()


def load_experiment_config(path: Path | None) -> ExperimentConfig:
    """Read a TOML experiment file; None yields the documented defaults."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(detail=f"{ERROR_INVALID_CONFIG}: no config file at {path}")
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(detail=f"{ERROR_INVALID_CONFIG}: {e}") from e
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        errors = [{"field": ".".join(str(loc) for loc in err["loc"]), "message": err["msg"]} for err in e.errors()]
        raise ConfigError(detail=f"{ERROR_INVALID_CONFIG}: {errors[0]['field']}: {errors[0]['message']}",
                          errors=errors) from e


def config_hash(config: BaseModel) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def with_overrides(config: ExperimentConfig, seed: int | None = None, out: Path | None = None) -> ExperimentConfig:
    """Apply the CLI flags: one seed for evaluation and every training run, and the output directory."""
    update = {}
    if seed is not None:
        update["seeds"] = [seed]
        for section in ("victim", "diffusion", "ae"):
            update[section] = getattr(config, section).model_copy(update={"seed": seed})
    if out is not None:
        update["output_dir"] = Path(out)
    return config.model_copy(update=update) if update else config


def output_root(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) if config.output_dir is not None else get_app_settings().SHIFTLAB_OUTPUT_ROOT
