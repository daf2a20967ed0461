from abc import ABC, abstractmethod

from models.response.artifact_response import ArtifactResponse
from service.nnkit import LabModule


class ICheckpointRepository(ABC):
    """Interface for trained model checkpoints and their training curves"""

    @abstractmethod
    def save(self, name: str, model: LabModule, config_hash: str) -> ArtifactResponse:
        """Write a checkpoint under a stable name"""
        pass

    @abstractmethod
    def load(self, name: str) -> ArtifactResponse:
        """Load a checkpoint; a missing one is reported, not raised"""
        pass

    @abstractmethod
    def save_curve(self, name: str, rows: list[dict[str, float]]) -> ArtifactResponse:
        """Write a training curve as CSV"""
        pass
