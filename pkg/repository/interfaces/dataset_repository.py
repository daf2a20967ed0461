from abc import ABC, abstractmethod

from models.response.artifact_response import ArtifactResponse
from service.diffusion import TransitionDataset


class IDatasetRepository(ABC):
    """Interface for the (history, next frame) training set of the denoiser"""

    @abstractmethod
    def save(self, dataset: TransitionDataset, env_hash: str) -> ArtifactResponse:
        pass

    @abstractmethod
    def load(self) -> ArtifactResponse:
        pass
