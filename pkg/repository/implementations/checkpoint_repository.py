from pathlib import Path

import pandas as pd

from constants import ERROR_CODE_NOT_FOUND, ERROR_MISSING_CHECKPOINT, LOG_CHECKPOINT_LOADED, LOG_CHECKPOINT_SAVED
from models.response.artifact_response import ArtifactResponse
from repository.interfaces.checkpoint_repository import ICheckpointRepository
from service.nnkit import LabModule, load_model, save_model
from utils.handle_repo_errors import handle_repo_errors
from utils.logger import logger
from utils.make_repo_response import make_repo_response


class CheckpointRepositoryImpl(ICheckpointRepository):
    """Checkpoints as <root>/checkpoints/<name>.safetensors, curves as <root>/curves/<name>.csv"""

    def __init__(self, root: Path):
        self.root = Path(root)

    def _path(self, name: str) -> Path:
        return self.root / "checkpoints" / f"{name}.safetensors"

    @handle_repo_errors
    def save(self, name: str, model: LabModule, config_hash: str) -> ArtifactResponse:
        path = save_model(model, self._path(name), config_hash)
        logger.info(LOG_CHECKPOINT_SAVED, extra={"name": name, "path": str(path), "parameters": model.parameter_count})
        return make_repo_response("success", "CHECKPOINT_SAVED", f"Checkpoint {name} saved", path=path)

    @handle_repo_errors
    def load(self, name: str) -> ArtifactResponse:
        path = self._path(name)
        if not path.is_file():
            return make_repo_response("error", ERROR_CODE_NOT_FOUND, f"{ERROR_MISSING_CHECKPOINT}: {name}", path=path)
        model = load_model(path)
        logger.info(LOG_CHECKPOINT_LOADED, extra={"name": name, "path": str(path)})
        return make_repo_response("success", "CHECKPOINT_LOADED", f"Checkpoint {name} loaded", path=path, data=model)

    @handle_repo_errors
    def save_curve(self, name: str, rows: list[dict[str, float]]) -> ArtifactResponse:
        path = self.root / "curves" / f"{name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows).to_csv(path, index=False)
        return make_repo_response("success", "CURVE_SAVED", f"Training curve {name} saved", path=path)
