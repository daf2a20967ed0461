import json
from pathlib import Path

import click

from configuration.config import config_hash, load_experiment_config, with_overrides
from constants import LOG_CONFIG_LOADED
from models.response.command_result import CommandResult
from service.experiment import ExperimentService
from utils.logger import logger


def _emit(result: CommandResult) -> None:
    click.echo(json.dumps(result.to_dict(), indent=2))


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Experiment TOML file; defaults apply to every missing key.")
@click.option("--seed", type=int, default=None, help="Run with this single seed instead of the configured list.")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Output directory (default: $SHIFTLAB_OUTPUT_ROOT).")
@click.pass_context
def cli(ctx: click.Context, config_path: Path | None, seed: int | None, out: Path | None):
    """Diffusion-based attacks and defenses on a toy image-input RL task."""
    config = with_overrides(load_experiment_config(config_path), seed=seed, out=out)
    logger.info(LOG_CONFIG_LOADED, extra={"path": str(config_path), "config_hash": config_hash(config),
                                          "seeds": len(config.seeds)})
    ctx.obj = ExperimentService(config)


@cli.command("train-victim")
@click.pass_obj
def train_victim(service: ExperimentService):
    _emit(service.train_victim())


@cli.command("train-diffusion")
@click.pass_obj
def train_diffusion(service: ExperimentService):
    _emit(service.train_diffusion())


@cli.command("train-ae")
@click.pass_obj
def train_ae(service: ExperimentService):
    _emit(service.train_ae())


@cli.command("attack-eval")
@click.option("--cell", default=None, metavar="ATTACKxDEFENSE", help="Evaluate one grid cell, e.g. pgd-15xpurifier.")
@click.pass_obj
def attack_eval(service: ExperimentService, cell: str | None):
    _emit(service.attack_eval(cell))


@cli.command("detect-eval")
@click.pass_obj
def detect_eval(service: ExperimentService):
    _emit(service.detect_eval())


@cli.command("report")
@click.pass_obj
def report(service: ExperimentService):
    _emit(service.report())


@cli.command("score-ae")
@click.argument("frames", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_obj
def score_ae(service: ExperimentService, frames: Path, csv_path: Path | None):
    """Reconstruction error of every frame in FRAMES (.npy stack or trajectory .jsonl)."""
    _emit(service.score_ae(frames, csv_path))
