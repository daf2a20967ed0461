from pathlib import Path

from constants import DATASET_VERSION, ERROR_CODE_NOT_FOUND
from models.response.artifact_response import ArtifactResponse
from repository.implementations.packed import read_packed, write_packed
from repository.interfaces.dataset_repository import IDatasetRepository
from service.diffusion import TransitionDataset
from utils.handle_repo_errors import handle_repo_errors
from utils.make_repo_response import make_repo_response


class DatasetRepositoryImpl(IDatasetRepository):
    def __init__(self, root: Path):
        self.path = Path(root) / "data" / "transitions.bin"

    @handle_repo_errors
    def save(self, dataset: TransitionDataset, env_hash: str) -> ArtifactResponse:
        header = {"version": DATASET_VERSION, "env_hash": env_hash, "k": int(dataset.history_actions.shape[1]),
                  "count": len(dataset)}
        path = write_packed(self.path, header, {"targets": dataset.targets, "history_frames": dataset.history_frames,
                                                "history_actions": dataset.history_actions})
        return make_repo_response("success", "DATASET_SAVED", f"{len(dataset)} transitions saved", path=path)

    @handle_repo_errors
    def load(self) -> ArtifactResponse:
        if not self.path.is_file():
            return make_repo_response("error", ERROR_CODE_NOT_FOUND, "No transition dataset", path=self.path)
        header, arrays = read_packed(self.path, DATASET_VERSION)
        dataset = TransitionDataset(arrays["targets"], arrays["history_frames"], arrays["history_actions"])
        return make_repo_response("success", "DATASET_LOADED", f"{len(dataset)} transitions loaded", path=self.path,
                                  data={"dataset": dataset, "env_hash": header["env_hash"]})
