from abc import ABC, abstractmethod

from models.data.stats import CleanStats
from models.response.artifact_response import ArtifactResponse


class ICleanStatsRepository(ABC):
    """Interface for the detector's clean-trajectory statistics"""

    @abstractmethod
    def save(self, stats: CleanStats) -> ArtifactResponse:
        pass

    @abstractmethod
    def load(self, source_hash: str) -> ArtifactResponse:
        pass
