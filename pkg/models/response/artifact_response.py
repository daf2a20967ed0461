from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field


class ArtifactResponse(BaseModel):
    status: str = Field(default="success")
    error_code: Optional[str] = Field(default=None)
    message: Optional[str] = Field(default=None)
    path: Optional[Path] = Field(default=None)
    data: Optional[Any] = Field(default=None)

    model_config = ConfigDict(
        arbitrary_types_allowed=True,
        extra="forbid"
    )

    @property
    def ok(self) -> bool:
        return self.status == "success"
