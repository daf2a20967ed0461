from pathlib import Path
from typing import Any

from models.response.artifact_response import ArtifactResponse


def make_repo_response(status: str, error_code: str, message: str, path: Path | None = None,
                       data: Any = None) -> ArtifactResponse:

    return ArtifactResponse(status=status, error_code=error_code, message=message, path=path, data=data)
