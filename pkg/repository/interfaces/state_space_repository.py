from abc import ABC, abstractmethod

from models.data.env import EnvState
from models.response.artifact_response import ArtifactResponse


class IStateSpaceRepository(ABC):
    """Interface for the cache of enumerated valid states, keyed by environment hash"""

    @abstractmethod
    def save(self, env_hash: str, states: list[EnvState]) -> ArtifactResponse:
        pass

    @abstractmethod
    def load(self, env_hash: str) -> ArtifactResponse:
        pass
