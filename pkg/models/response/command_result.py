from pydantic import BaseModel, Field


class CommandResult(BaseModel):
    command: str
    status: str = Field(default="success")
    message: str | None = Field(default=None)
    config_hash: str | None = Field(default=None)
    artifacts: dict[str, str] = Field(default_factory=dict)

    def to_dict(self):
        return {
            "command": self.command,
            "status": self.status,
            "message": self.message,
            "config_hash": self.config_hash,
            "artifacts": self.artifacts,
        }
