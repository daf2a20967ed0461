from pathlib import Path

import numpy as np

from constants import ERROR_CODE_NOT_FOUND, LOG_STATE_SPACE_CACHE_HIT, STATE_SPACE_VERSION
from models.data.env import EnvState
from models.response.artifact_response import ArtifactResponse
from repository.implementations.packed import read_packed, write_packed
from repository.interfaces.state_space_repository import IStateSpaceRepository
from utils.handle_repo_errors import handle_repo_errors
from utils.logger import logger
from utils.make_repo_response import make_repo_response


class StateSpaceRepositoryImpl(IStateSpaceRepository):
    """Valid states packed as int32 records [agent_row, tick, *car_cols]"""

    def __init__(self, root: Path):
        self.root = Path(root)

    def _path(self, env_hash: str) -> Path:
        return self.root / "cache" / f"states-{env_hash}.bin"

    @handle_repo_errors
    def save(self, env_hash: str, states: list[EnvState]) -> ArtifactResponse:
        records = np.asarray([s.pack() for s in states], dtype=np.int32)
        path = write_packed(self._path(env_hash), {"version": STATE_SPACE_VERSION, "env_hash": env_hash,
                                                   "count": len(states)}, {"states": records})
        return make_repo_response("success", "STATE_SPACE_SAVED", f"{len(states)} states cached", path=path)

    @handle_repo_errors
    def load(self, env_hash: str) -> ArtifactResponse:
        path = self._path(env_hash)
        if not path.is_file():
            return make_repo_response("error", ERROR_CODE_NOT_FOUND, "No cached state space", path=path)
        header, arrays = read_packed(path, STATE_SPACE_VERSION)
        states = [EnvState.unpack(r) for r in arrays["states"]]
        if header["env_hash"] != env_hash or header["count"] != len(states):
            return make_repo_response("error", "STALE_CACHE", "Cached state space does not match", path=path)
        logger.info(LOG_STATE_SPACE_CACHE_HIT, extra={"count": len(states), "env_hash": env_hash})
        return make_repo_response("success", "STATE_SPACE_LOADED", f"{len(states)} states loaded", path=path,
                                  data=states)
