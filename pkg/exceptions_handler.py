from typing import Any

from constants import (
    ERROR_CODE_CAPACITY, ERROR_CODE_CONFIG, ERROR_CODE_DEGENERATE_MASS, ERROR_CODE_DEGENERATE_STATS,
    ERROR_CODE_DOMAIN, ERROR_CODE_FORMAT, ERROR_CODE_NOT_A_RENDER, ERROR_CODE_NUMERICS, ERROR_CODE_SHAPE,
    ERROR_CODE_STATE, ERROR_CODE_TRAINING, ERROR_CODE_WARMUP,
)


class LabException(Exception):
    error_code: str = "UNEXPECTED_ERROR"
    exit_code: int = 1

    def __init__(self, detail: str = "Something Went Wrong", **kwargs: Any):
        super().__init__(detail)
        self.detail = detail
        self.context = kwargs


class ConfigError(LabException):
    error_code = ERROR_CODE_CONFIG
    exit_code = 2

    def __init__(self, detail: str = "Invalid configuration", **kwargs: Any):
        super().__init__(detail, **kwargs)


class StateError(LabException):
    error_code = ERROR_CODE_STATE
    exit_code = 3

    def __init__(self, detail: str = "Invalid state", **kwargs: Any):
        super().__init__(detail, **kwargs)


class NotAValidRender(LabException):
    error_code = ERROR_CODE_NOT_A_RENDER
    exit_code = 3

    def __init__(self, detail: str = "Not a valid render", **kwargs: Any):
        super().__init__(detail, **kwargs)


class WarmupError(LabException):
    error_code = ERROR_CODE_WARMUP
    exit_code = 3

    def __init__(self, detail: str = "History not warm", **kwargs: Any):
        super().__init__(detail, **kwargs)


class CapacityError(LabException):
    error_code = ERROR_CODE_CAPACITY
    exit_code = 4

    def __init__(self, detail: str = "Capacity exceeded", **kwargs: Any):
        super().__init__(detail, **kwargs)


class ShapeError(LabException):
    error_code = ERROR_CODE_SHAPE
    exit_code = 5

    def __init__(self, detail: str = "Shape mismatch", **kwargs: Any):
        super().__init__(detail, **kwargs)


class DomainError(LabException):
    error_code = ERROR_CODE_DOMAIN
    exit_code = 5

    def __init__(self, detail: str = "Argument outside the function domain", **kwargs: Any):
        super().__init__(detail, **kwargs)


class NumericsError(LabException):
    error_code = ERROR_CODE_NUMERICS
    exit_code = 6

    def __init__(self, detail: str = "Non-finite value", **kwargs: Any):
        super().__init__(detail, **kwargs)


class DegenerateMassError(LabException):
    error_code = ERROR_CODE_DEGENERATE_MASS
    exit_code = 6

    def __init__(self, detail: str = "Zero-mass frame", **kwargs: Any):
        super().__init__(detail, **kwargs)


class DegenerateStatsError(LabException):
    error_code = ERROR_CODE_DEGENERATE_STATS
    exit_code = 6

    def __init__(self, detail: str = "Degenerate clean statistics", **kwargs: Any):
        super().__init__(detail, **kwargs)


class FormatError(LabException):
    error_code = ERROR_CODE_FORMAT
    exit_code = 7

    def __init__(self, detail: str = "The file could not be decoded", **kwargs: Any):
        super().__init__(detail, **kwargs)


class TrainingError(LabException):
    error_code = ERROR_CODE_TRAINING
    exit_code = 8

    def __init__(self, detail: str = "Training failed", curve: list[dict[str, float]] | None = None, **kwargs: Any):
        super().__init__(detail, **kwargs)
        self.curve = curve or []
