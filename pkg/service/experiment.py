from pathlib import Path

import numpy as np
import pandas as pd

from configuration.config import config_hash, get_app_settings, output_root
from constants import (ERROR_CODE_NOT_FOUND, ERROR_MISSING_CHECKPOINT, ERROR_NO_CLEAN_LOGS, LOG_CELL_DONE,
                       LOG_DATASET_CACHE_HIT, LOG_DETECTION_DONE, LOG_REPORT_WRITTEN)
from exceptions_handler import ConfigError, FormatError, TrainingError
from models.data.env import Action, NUM_ACTIONS
from models.data.stats import QTable
from models.data.trajectory import TrajectoryLog
from models.request.attack import AttackConfig, AttackVariant, DefenseKind
from models.request.experiment import ExperimentConfig
from models.response.command_result import CommandResult
from repository.implementations.checkpoint_repository import CheckpointRepositoryImpl
from repository.implementations.clean_stats_repository import CleanStatsRepositoryImpl
from repository.implementations.dataset_repository import DatasetRepositoryImpl
from repository.implementations.state_space_repository import StateSpaceRepositoryImpl
from repository.implementations.trajectory_repository import TrajectoryRepositoryImpl
from repository.interfaces.checkpoint_repository import ICheckpointRepository
from repository.interfaces.clean_stats_repository import ICleanStatsRepository
from repository.interfaces.dataset_repository import IDatasetRepository
from repository.interfaces.state_space_repository import IStateSpaceRepository
from repository.interfaces.trajectory_repository import ITrajectoryRepository
from service import report
from service.attacks import AttackModels, run_episode
from service.defense import cusum_detect, estimate_clean_stats, mad_detect
from service.diffusion import TransitionDataset, collect_transitions, train_denoiser
from service.envcore import MiniFreeway
from service.metrics import StateSpaceIndex, action_deviation_rate, annotate_log, calibrate_thresholds, episode_reward
from service.networks import QNetwork
from service.realism import reconstruction_errors, train_autoencoder
from service.victim import train_dqn
from utils.logger import logger, log_performance

VICTIM, DENOISER, AUTOENCODER = "victim", "denoiser", "autoencoder"
CLEAN_SERIES = "w1_true_adjacent"
DETECTOR_SERIES = "w1_consecutive_observed"


def behavior_policy(env: MiniFreeway, table: QTable, epsilon: float):
    """Optimal action from the exact Q table, replaced by a uniform one with probability epsilon."""
    def policy(state, rng: np.random.Generator) -> Action:
        if rng.random() < epsilon:
            return Action(int(rng.integers(NUM_ACTIONS)))
        return table.greedy(env.canonical(state))
    return policy


def rollout_frames(env: MiniFreeway, policy, episodes: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    frames = []
    for _ in range(episodes):
        state, done = env.reset(), False
        frames.append(env.render(state))
        while not done:
            state, _, done = env.step(state, policy(state, rng))
            frames.append(env.render(state))
    return np.stack(frames).astype(np.float32)


def _mean(values) -> float:
    values = [v for v in values if np.isfinite(v)]
    return float(np.mean(values)) if values else float("nan")


def episode_row(log: TrajectoryLog, q: QNetwork) -> dict:
    """Per-episode figures; stealth metrics average over attacked steps, or every step when none was attacked."""
    steps = [s for s in log.steps if s.attacked] or log.steps
    attacked = [s for s in log.steps if s.attacked]

    def over(name, subset=steps):
        return _mean(s.metrics[name] for s in subset if name in s.metrics)

    return {
        "attack": log.attack,
        "defense": log.defense,
        "seed": log.seed,
        "episode": log.episode,
        "reward": episode_reward(log),
        "deviation": action_deviation_rate(log, q),
        "recon_error": over("recon_error"),
        "wasserstein": over(DETECTOR_SERIES),
        "ssim": over("ssim"),
        "l2_to_true": over("l2_to_true"),
        "realistic": over("realistic"),
        "semantics_changing": over("semantics_changing"),
        "history_aligned": over("history_aligned"),
        "faithfulness": over("faithfulness", log.steps),
        "attacked_fraction": log.attacked_fraction,
        "generation_ms": over("generation_ms", attacked),
    }


def parse_cell(cell: str) -> tuple[str, str]:
    attack, sep, defense = cell.rpartition("x")
    if not sep or not attack or not defense:
        raise ConfigError(detail=f"cell must look like ATTACKxDEFENSE, got {cell!r}")
    return attack, defense


class ExperimentService:
    def __init__(self,
                 config: ExperimentConfig,
                 checkpoints: ICheckpointRepository | None = None,
                 trajectories: ITrajectoryRepository | None = None,
                 study_trajectories: ITrajectoryRepository | None = None,
                 state_space: IStateSpaceRepository | None = None,
                 datasets: IDatasetRepository | None = None,
                 clean_stats: ICleanStatsRepository | None = None,
                 show_progress: bool | None = None):
        self.config = config
        self.out = output_root(config)
        self.hash = config_hash(config)
        self.env_hash = config_hash(config.env)
        self.checkpoints = checkpoints or CheckpointRepositoryImpl(self.out)
        self.trajectories = trajectories or TrajectoryRepositoryImpl(self.out)
        self.study_trajectories = study_trajectories or TrajectoryRepositoryImpl(self.out / "studies")
        self.state_space = state_space or StateSpaceRepositoryImpl(self.out)
        self.datasets = datasets or DatasetRepositoryImpl(self.out)
        self.clean_stats = clean_stats or CleanStatsRepositoryImpl(self.out)
        self.show_progress = get_app_settings().SHOW_PROGRESS if show_progress is None else show_progress
        self._env: MiniFreeway | None = None
        self._index: StateSpaceIndex | None = None

    @property
    def k(self) -> int:
        return self.config.diffusion.history_len

    def env(self) -> MiniFreeway:
        """Environment whose valid-state set comes from the cache when one matches this config."""
        if self._env is None:
            env = MiniFreeway(self.config.env)
            cached = self.state_space.load(self.env_hash)
            if cached.ok:
                env.valid_states = cached.data
            else:
                self.state_space.save(self.env_hash, env.valid_states)
            self._env = env
        return self._env

    def state_index(self) -> StateSpaceIndex:
        if self._index is None:
            env = self.env()
            self._index = StateSpaceIndex(env, env.valid_states)
        return self._index

    def _require(self, name: str):
        result = self.checkpoints.load(name)
        if result.error_code == ERROR_CODE_NOT_FOUND:
            raise ConfigError(detail=result.message, checkpoint=name, path=str(result.path))
        return result.data

    def _save_training(self, name: str, model, curve: list[dict[str, float]]) -> CommandResult:
        saved = self.checkpoints.save(name, model, self.hash)
        curve_file = self.checkpoints.save_curve(name, curve)
        return CommandResult(command=f"train-{name}", message=saved.message, config_hash=self.hash,
                             artifacts={"checkpoint": str(saved.path), "curve": str(curve_file.path)})

    @property
    def dataset_key(self) -> str:
        h = self.config.diffusion
        return f"{self.env_hash}-k{h.history_len}-e{h.dataset_episodes}-b{h.behavior_epsilon}-s{h.seed}"

    def transitions(self) -> TransitionDataset:
        """Denoiser training set, reused from disk when it was collected under the same key."""
        cached = self.datasets.load()
        if cached.ok and cached.data["env_hash"] == self.dataset_key:
            logger.info(LOG_DATASET_CACHE_HIT, extra={"count": len(cached.data["dataset"])})
            return cached.data["dataset"]
        hyper = self.config.diffusion
        env = self.env()
        table, _ = env.value_iteration()
        dataset = collect_transitions(self.config.env, hyper.history_len, hyper.dataset_episodes,
                                      behavior_policy(env, table, hyper.behavior_epsilon), hyper.seed)
        self.datasets.save(dataset, self.dataset_key)
        return dataset

    # -- training ---------------------------------------------------------------------------

    @log_performance(threshold_ms=60_000)
    def train_victim(self) -> CommandResult:
        try:
            q, curve = train_dqn(self.config.env, self.config.victim, show_progress=self.show_progress)
        except TrainingError as e:
            self.checkpoints.save_curve(VICTIM, e.curve)
            raise
        return self._save_training(VICTIM, q, curve.rows)

    @log_performance(threshold_ms=60_000)
    def train_diffusion(self) -> CommandResult:
        hyper = self.config.diffusion
        model, curve = train_denoiser(self.transitions(), self.config.env, hyper, self.config.noise,
                                      show_progress=self.show_progress)
        return self._save_training(DENOISER, model, curve)

    @log_performance(threshold_ms=60_000)
    def train_ae(self) -> CommandResult:
        hyper = self.config.ae
        env = self.env()
        table, _ = env.value_iteration()
        # the denoiser's behaviour policy, on a disjoint seed stream
        frames = rollout_frames(env, behavior_policy(env, table, self.config.diffusion.behavior_epsilon),
                                hyper.dataset_episodes, hyper.seed + 1)
        try:
            ae, curve = train_autoencoder(frames, hyper, show_progress=self.show_progress)
        except TrainingError as e:
            self.checkpoints.save_curve(AUTOENCODER, e.curve)
            raise
        return self._save_training(AUTOENCODER, ae, curve)

    # -- evaluation -------------------------------------------------------------------------

    def _models(self) -> AttackModels:
        return AttackModels(q=self._require(VICTIM), noise=self.config.noise, denoiser=self._require(DENOISER),
                            ae=self._require(AUTOENCODER))

    def _thresholds(self) -> tuple[float, float]:
        th = self.config.thresholds
        delta1 = th.delta1 if th.delta1 is not None else calibrate_thresholds(self.state_index(), self.k)[0]
        return delta1, th.delta2 if th.delta2 is not None else self.k * delta1

    def _run_cell(self, attack: AttackConfig, defense: DefenseKind, models: AttackModels,
                  repo: ITrajectoryRepository, thresholds: tuple[float, float]) -> list[dict]:
        env = self.env()
        rows = []
        for seed in self.config.seeds:
            for episode in range(self.config.evaluation.episodes_per_seed):
                log = run_episode(env, attack, models, seed, episode, defense, self.config.defense, self.k,
                                  self.hash)
                annotate_log(log, self.state_index(), *thresholds, self.k, ae=models.ae)
                repo.save(log)
                rows.append(episode_row(log, models.q))
        frame = pd.DataFrame(rows)
        logger.info(LOG_CELL_DONE, extra={"attack": attack.name, "defense": defense.value, "episodes": len(rows),
                                          "reward_mean": float(frame["reward"].mean())})
        return rows

    def _write_cell_rows(self, attack: str, defense: str, rows: list[dict]) -> None:
        path = self.out / "summaries" / "cells" / f"{attack}__{defense}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows).to_csv(path, index=False)

    def _merge_cells(self) -> pd.DataFrame:
        order = [(a.name, d.value) for a in self.config.attacks for d in self.config.defenses]
        frames = []
        for attack, defense in order:
            path = self.out / "summaries" / "cells" / f"{attack}__{defense}.csv"
            if path.is_file():
                frames.append(pd.read_csv(path))
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()

    def _write_summary(self, rows: pd.DataFrame, keys: list[str], name: str) -> Path:
        table = report.aggregate(rows, keys)
        table["config_hash"] = self.hash
        path = self.out / "summaries" / name
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False)
        return path

    def _shift_o(self) -> AttackConfig:
        for attack in self.config.attacks:
            if attack.variant == AttackVariant.SHIFT_O:
                return attack
        return AttackConfig(variant=AttackVariant.SHIFT_O)

    def _ablations(self, models: AttackModels, thresholds: tuple[float, float]) -> Path:
        base = self._shift_o()
        studies = [("gamma2", base.model_copy(update={"gamma2": g, "use_realism": False,
                                                        "label": f"shift-o-g{g:g}-no-realism"}))
                   for g in self.config.evaluation.gamma2_grid]
        studies += [("realism", base.model_copy(update={"use_realism": on,
                                                         "label": f"shift-o-realism-{'on' if on else 'off'}"}))
                    for on in (True, False)]
        rows = []
        for study, attack in studies:
            for row in self._run_cell(attack, DefenseKind.NONE, models, self.study_trajectories, thresholds):
                rows.append({**row, "study": study, "gamma2": attack.gamma2, "use_realism": attack.use_realism})
        return self._write_summary(pd.DataFrame(rows), ["study", "attack", "defense", "gamma2", "use_realism"],
                                   "ablation_summary.csv")

    def _frequency_study(self, models: AttackModels, thresholds: tuple[float, float]) -> Path:
        rows = []
        for variant in (AttackVariant.SHIFT_O, AttackVariant.SHIFT_I):
            base = next((a for a in self.config.attacks if a.variant == variant), AttackConfig(variant=variant))
            for xi in self.config.evaluation.frequency_grid:
                attack = base.model_copy(update={"xi": xi, "label": f"{variant.value}-xi{xi:g}"})
                for row in self._run_cell(attack, DefenseKind.NONE, models, self.study_trajectories, thresholds):
                    rows.append({**row, "variant": variant.value, "xi": xi})
        return self._write_summary(pd.DataFrame(rows), ["attack", "variant", "xi"], "frequency_summary.csv")

    @log_performance(threshold_ms=60_000)
    def attack_eval(self, cell: str | None = None) -> CommandResult:
        models = self._models()
        cells = [(a, d) for a in self.config.attacks for d in self.config.defenses]
        if cell is not None:
            wanted = parse_cell(cell)
            cells = [(a, d) for a, d in cells if (a.name, d.value) == wanted]
            if not cells:
                raise ConfigError(detail=f"cell {cell!r} is not in the configured grid")
        thresholds = self._thresholds()

        for attack, defense in cells:
            rows = self._run_cell(attack, defense, models, self.trajectories, thresholds)
            self._write_cell_rows(attack.name, defense.value, rows)
        artifacts = {"summary": str(self._write_summary(self._merge_cells(), ["attack", "defense"], "summary.csv")),
                     "logs": str(self.out / "logs")}

        evaluation = self.config.evaluation
        if cell is None and evaluation.run_ablations:
            artifacts["ablation"] = str(self._ablations(models, thresholds))
        if cell is None and evaluation.run_frequency_study:
            artifacts["frequency"] = str(self._frequency_study(models, thresholds))
        return CommandResult(command="attack-eval", message=f"{len(cells)} cells evaluated", config_hash=self.hash,
                             artifacts=artifacts)

    def _load_logs(self, repo: ITrajectoryRepository) -> list[TrajectoryLog]:
        return [repo.load(path).data for path in repo.list_logs()]

    @log_performance(threshold_ms=30_000)
    def detect_eval(self) -> CommandResult:
        logs = [log for log in self._load_logs(self.trajectories) if log.defense == DefenseKind.NONE.value]
        clean = [log for log in logs if log.attack == AttackVariant.NONE.value]
        if not clean:
            raise ConfigError(detail=ERROR_NO_CLEAN_LOGS, logs=str(self.out / "logs"))

        cached = self.clean_stats.load(self.hash)
        if cached.ok:
            stats = cached.data
        else:
            series = [v for log in clean for v in log.metric_series(CLEAN_SERIES)]
            stats = estimate_clean_stats(series, self.hash, self.config.detector.mad_floor_ratio)
            self.clean_stats.save(stats)

        rows = []
        for attack in dict.fromkeys(log.attack for log in logs):
            episodes = [log for log in logs if log.attack == attack]
            mad_hits, cusum_hits = [], []
            for log in episodes:
                series = [v for v in log.metric_series(DETECTOR_SERIES) if np.isfinite(v)]
                mad_hits.append(any(mad_detect(series, stats, self.config.detector)))
                cusum_hits.append(cusum_detect(series, stats, self.config.detector) is not None)
            mad_rate, cusum_rate = float(np.mean(mad_hits)), float(np.mean(cusum_hits))
            rows.append({"attack": attack, "episodes": len(episodes), "mad_rate": mad_rate, "cusum_rate": cusum_rate,
                         "mad_verdict": "Detected" if mad_rate >= 0.5 else "Undetected",
                         "cusum_verdict": "Detected" if cusum_rate >= 0.5 else "Undetected"})

        path = self.out / "summaries" / "detection.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        table = pd.DataFrame(rows)
        table["config_hash"] = self.hash
        table.to_csv(path, index=False)
        logger.info(LOG_DETECTION_DONE, extra={"attacks": len(rows), "clean_median": stats.median,
                                               "clean_mad": stats.mad})
        return CommandResult(command="detect-eval", message=f"{len(rows)} attacks judged", config_hash=self.hash,
                             artifacts={"detection": str(path)})

    # -- reporting --------------------------------------------------------------------------

    def _read_summary(self, name: str) -> pd.DataFrame | None:
        path = self.out / "summaries" / name
        if not path.is_file() or path.stat().st_size == 0:
            return None
        try:
            return pd.read_csv(path)
        except pd.errors.EmptyDataError:
            return None
        except pd.errors.ParserError as e:
            raise FormatError(detail=f"{path}: {e}") from e

    def _realism_curves(self) -> dict[str, np.ndarray]:
        curves = {}
        for on in (True, False):
            label = f"shift-o-realism-{'on' if on else 'off'}"
            logs = [log for log in self._load_logs(self.study_trajectories) if log.attack == label]
            if not logs:
                continue
            length = min(len(log) for log in logs)
            per_step = [[log.steps[t].metrics.get("recon_error", np.nan) for t in range(length)] for log in logs]
            curves[label] = np.nanmean(np.asarray(per_step, dtype=np.float64), axis=0)
        return curves

    def _l2_samples(self) -> dict[str, list[float]]:
        samples: dict[str, list[float]] = {}
        for log in self._load_logs(self.trajectories):
            if log.defense != DefenseKind.NONE.value:
                continue
            if log.attack == AttackVariant.SHIFT_O.value or log.attack.startswith(AttackVariant.PGD.value):
                samples.setdefault(log.attack, []).extend(
                    s.metrics["l2_to_true"] for s in log.steps if s.attacked and "l2_to_true" in s.metrics)
        return {k: v for k, v in sorted(samples.items()) if v}

    @log_performance(threshold_ms=10_000)
    def report(self) -> CommandResult:
        summary = self._read_summary("summary.csv")
        detection = self._read_summary("detection.csv")
        frequency = self._read_summary("frequency_summary.csv")
        ablation = self._read_summary("ablation_summary.csv")

        out = self.out / "report"
        out.mkdir(parents=True, exist_ok=True)
        artifacts = {}
        text = out / "report.txt"
        text.write_text(report.digest(summary, detection, frequency))
        artifacts["digest"] = str(text)

        if summary is not None and not summary.empty:
            if ablation is not None and (ablation["study"] == "gamma2").any():
                artifacts["gamma2_sweep"] = str(report.plot_gamma2_sweep(ablation, out / "gamma2_sweep.png"))
            curves = self._realism_curves()
            if curves:
                artifacts["realism"] = str(report.plot_realism_curves(curves, out / "realism_on_off.png"))
            samples = self._l2_samples()
            if samples:
                artifacts["l2_histogram"] = str(report.plot_l2_histogram(samples, out / "l2_histogram.png"))
            if frequency is not None and not frequency.empty:
                artifacts["frequency"] = str(report.plot_frequency(frequency, out / "frequency.png"))
        logger.info(LOG_REPORT_WRITTEN, extra={"path": str(out), "figures": len(artifacts) - 1})
        return CommandResult(command="report", message=f"report written to {out}", config_hash=self.hash,
                             artifacts=artifacts)

    def score_ae(self, frames_path: Path, out_path: Path | None = None) -> CommandResult:
        """Per-frame reconstruction errors of a stacked (N, F, F) .npy file or a trajectory log's observations."""
        ae = self._require(AUTOENCODER)
        frames_path = Path(frames_path)
        if frames_path.suffix == ".jsonl":
            frames = self.trajectories.load(frames_path).data.observed_frames
        else:
            try:
                frames = np.load(frames_path, allow_pickle=False)
            except (OSError, ValueError) as e:
                raise FormatError(detail=f"{frames_path}: {e}") from e
        errors = reconstruction_errors(ae, frames)
        out_path = Path(out_path) if out_path else self.out / "summaries" / f"{frames_path.stem}-recon.csv"
        out_path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame({"frame": np.arange(len(errors)), "recon_error": errors}).to_csv(out_path, index=False)
        return CommandResult(command="score-ae", message=f"{len(errors)} frames scored", config_hash=self.hash,
                             artifacts={"scores": str(out_path)})
