import json
from pathlib import Path

import numpy as np

from constants import ERROR_CORRUPT_FILE, TRAJECTORY_LOG_VERSION
from exceptions_handler import FormatError
from models.data.env import Action, EnvState
from models.data.trajectory import TrajectoryLog, TrajectoryStep
from models.request.env import EnvConfig
from models.response.artifact_response import ArtifactResponse
from repository.interfaces.trajectory_repository import ITrajectoryRepository
from utils.handle_repo_errors import handle_repo_errors
from utils.make_repo_response import make_repo_response

LOG_FORMAT = "shiftlab-trajectory"


class TrajectoryRepositoryImpl(ITrajectoryRepository):
    """One JSON record per step after a header line; observed frames live in a .npy sidecar"""

    def __init__(self, root: Path):
        self.dir = Path(root) / "logs"

    def _stem(self, log: TrajectoryLog) -> str:
        return f"{log.attack}__{log.defense}__seed{log.seed}__ep{log.episode}"

    @handle_repo_errors
    def save(self, log: TrajectoryLog) -> ArtifactResponse:
        self.dir.mkdir(parents=True, exist_ok=True)
        stem = self._stem(log)
        path = self.dir / f"{stem}.jsonl"
        sidecar = self.dir / f"{stem}.frames.npy"
        frames = np.stack([s.observed for s in log.steps]).astype(np.float32) if log.steps else np.zeros((0, 0, 0))
        np.save(sidecar, frames, allow_pickle=False)
        header = {
            "format": LOG_FORMAT,
            "version": TRAJECTORY_LOG_VERSION,
            "config_hash": log.config_hash,
            "env": log.env.model_dump(mode="json"),
            "attack": log.attack,
            "defense": log.defense,
            "seed": log.seed,
            "episode": log.episode,
            "frames": sidecar.name,
            "steps": len(log.steps),
        }
        with path.open("w") as fh:
            fh.write(json.dumps(header) + "\n")
            for i, step in enumerate(log.steps):
                fh.write(json.dumps(step.to_dict(frame_ref=i)) + "\n")
        return make_repo_response("success", "LOG_SAVED", f"Trajectory log {stem} saved", path=path)

    @handle_repo_errors
    def load(self, path: Path) -> ArtifactResponse:
        path = Path(path)
        with path.open() as fh:
            header = json.loads(fh.readline())
            rows = [json.loads(line) for line in fh if line.strip()]
        if header.get("format") != LOG_FORMAT or header.get("version") != TRAJECTORY_LOG_VERSION:
            raise FormatError(detail=f"{ERROR_CORRUPT_FILE}: {path} has format {header.get('format')!r} "
                                     f"version {header.get('version')!r}", version=header.get("version"))
        frames = np.load(path.parent / header["frames"], allow_pickle=False)
        if len(rows) != header["steps"] or len(frames) != len(rows):
            raise FormatError(detail=f"{ERROR_CORRUPT_FILE}: {path} step count does not match its header")

        log = TrajectoryLog(env=EnvConfig.model_validate(header["env"]), attack=header["attack"],
                            defense=header["defense"], seed=header["seed"], episode=header["episode"],
                            config_hash=header["config_hash"])
        for row in rows:
            log.append(TrajectoryStep(t=row["t"], true_state=EnvState.from_dict(row["true_state"]),
                                      observed=frames[row["observed_frame_ref"]], action=Action(row["action"]),
                                      reward=row["reward"], attacked=row["attacked"], metrics=row["metrics"]))
        return make_repo_response("success", "LOG_LOADED", f"Trajectory log {path.stem} loaded", path=path, data=log)

    def list_logs(self) -> list[Path]:
        return sorted(self.dir.glob("*.jsonl")) if self.dir.is_dir() else []
