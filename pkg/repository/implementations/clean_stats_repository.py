import json
from pathlib import Path

from constants import CLEAN_STATS_VERSION, ERROR_CODE_NOT_FOUND
from exceptions_handler import FormatError
from models.data.stats import CleanStats
from models.response.artifact_response import ArtifactResponse
from repository.interfaces.clean_stats_repository import ICleanStatsRepository
from utils.handle_repo_errors import handle_repo_errors
from utils.make_repo_response import make_repo_response


class CleanStatsRepositoryImpl(ICleanStatsRepository):
    def __init__(self, root: Path):
        self.root = Path(root)

    def _path(self, source_hash: str) -> Path:
        return self.root / "cache" / f"clean-stats-{source_hash}.json"

    @handle_repo_errors
    def save(self, stats: CleanStats) -> ArtifactResponse:
        path = self._path(stats.source_hash)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"version": CLEAN_STATS_VERSION, **stats.to_dict()}, sort_keys=True) + "\n")
        return make_repo_response("success", "CLEAN_STATS_SAVED", "Clean statistics saved", path=path)

    @handle_repo_errors
    def load(self, source_hash: str) -> ArtifactResponse:
        path = self._path(source_hash)
        if not path.is_file():
            return make_repo_response("error", ERROR_CODE_NOT_FOUND, "No clean statistics", path=path)
        record = json.loads(path.read_text())
        if record.get("version") != CLEAN_STATS_VERSION:
            raise FormatError(detail=f"clean statistics version {record.get('version')!r}", version=record.get("version"))
        stats = CleanStats(median=float(record["median"]), mad=float(record["mad"]), count=int(record["count"]),
                           source_hash=record["source_hash"])
        return make_repo_response("success", "CLEAN_STATS_LOADED", "Clean statistics loaded", path=path, data=stats)
