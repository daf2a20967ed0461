from abc import ABC, abstractmethod
from pathlib import Path

from models.data.trajectory import TrajectoryLog
from models.response.artifact_response import ArtifactResponse


class ITrajectoryRepository(ABC):
    """Interface for per-episode trajectory logs"""

    @abstractmethod
    def save(self, log: TrajectoryLog) -> ArtifactResponse:
        pass

    @abstractmethod
    def load(self, path: Path) -> ArtifactResponse:
        pass

    @abstractmethod
    def list_logs(self) -> list[Path]:
        pass
