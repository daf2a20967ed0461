import functools
import inspect
import logging
import math
import time
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from opentelemetry import trace
from opentelemetry.trace.status import Status, StatusCode

from configuration.config import Environment, get_app_settings
from utils.telemetry import tracer

app_settings = get_app_settings()

logging.basicConfig(
    level=getattr(logging, app_settings.LOG_LEVEL, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
)

# Exceptions du laboratoire qui signalent un artefact ou un calcul à inspecter : toujours avec la pile
TRACEBACK_ERRORS = {"NumericsError", "FormatError", "TrainingError"}


def loggable(value: Any) -> Any:
    """Réduire une valeur à un type accepté par les attributs de span (scalaires, chaînes, dictionnaires)"""
    if isinstance(value, dict):
        return {str(k): loggable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [loggable(v) for v in value] if len(value) <= 16 else f"<{len(value)} items>"
    if isinstance(value, np.ndarray):
        return f"<array shape={value.shape} dtype={value.dtype}>" if value.size > 1 else loggable(value.item())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, Path):
        return str(value)
    return value


def _should_trace(exc: Exception) -> bool:
    return (
        exc.__class__.__name__ in TRACEBACK_ERRORS
        or not hasattr(exc, "exit_code")
        or app_settings.ENVIRONMENT == Environment.DEVELOPMENT
    )


def _annotate_span(level: str, message: str, extra: Dict[str, Any]) -> None:
    span = trace.get_current_span()
    if not span.is_recording():
        return
    for key, value in extra.items():
        span.set_attribute(f"log.{key}", str(value))
    span.add_event(level, {"message": message})


class ConditionalLogger:
    """Journalisation standard doublée d'événements sur le span OpenTelemetry courant"""

    def __init__(self, name: str = "shiftlab"):
        self.python_logger = logging.getLogger(name)
        self.python_logger.setLevel(getattr(logging, app_settings.LOG_LEVEL, logging.INFO))

    def _log(self, level: int, message: str, extra: Optional[Dict[str, Any]], exc_info: bool = False) -> None:
        if not self.python_logger.isEnabledFor(level):
            return
        safe_extra = loggable(extra or {})
        self.python_logger.log(level, message, extra={"otel": safe_extra}, exc_info=exc_info)
        _annotate_span(logging.getLevelName(level).lower(), message, safe_extra)

    def debug(self, message: str, extra: Dict[str, Any] = None) -> None:
        self._log(logging.DEBUG, message, extra)

    def info(self, message: str, extra: Dict[str, Any] = None) -> None:
        self._log(logging.INFO, message, extra)

    def warning(self, message: str, extra: Dict[str, Any] = None) -> None:
        self._log(logging.WARNING, message, extra)

    def error(self, message: str, extra: Dict[str, Any] = None, exc_info: bool = False) -> None:
        self._log(logging.ERROR, message, extra, exc_info=exc_info)
        trace.get_current_span().set_status(Status(StatusCode.ERROR, message))

    def exception(self, e: Exception, message: Optional[str] = None, extra: Dict[str, Any] = None) -> None:
        """Journaliser une exception, avec sa pile quand son type le justifie"""
        safe_extra = loggable(extra or {})
        safe_extra["exception_type"] = e.__class__.__name__
        frame = inspect.currentframe().f_back
        if frame:
            safe_extra["source"] = f"{frame.f_globals['__name__']}.{frame.f_code.co_name}"

        self.python_logger.error(message or f"Exception: {e}", extra={"otel": safe_extra},
                                 exc_info=e if _should_trace(e) else None)
        span = trace.get_current_span()
        span.record_exception(e)
        span.set_status(Status(StatusCode.ERROR, str(e)))


logger = ConditionalLogger()


def log_performance(threshold_ms: int = 500):
    """Ouvrir un span par appel et signaler les appels plus lents que `threshold_ms`"""

    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            with tracer.start_as_current_span(f"{func.__module__}.{func.__qualname__}") as span:
                started = time.perf_counter()
                result = func(*args, **kwargs)
                elapsed_ms = (time.perf_counter() - started) * 1000
                span.set_attribute("function.duration_ms", elapsed_ms)
                if elapsed_ms > threshold_ms:
                    logger.warning(f"Slow call: {func.__qualname__} took {elapsed_ms:.0f} ms",
                                   extra={"function": func.__qualname__, "module": func.__module__,
                                          "elapsed_ms": elapsed_ms, "threshold_ms": threshold_ms})
                return result

        return wrapper

    return decorator
