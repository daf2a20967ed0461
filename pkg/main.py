import sys
from typing import Callable

import click
from opentelemetry import trace

from api.cli import cli
from configuration.config import get_app_settings
from exceptions_handler import ConfigError, FormatError, LabException, TrainingError
from utils.logger import logger
from utils.telemetry import tracer

app_settings = get_app_settings()

ExceptionHandler = Callable[[Exception], int]
_handlers: dict[type[Exception], ExceptionHandler] = {}


def exception_handler(exc_type: type[Exception]):
    def decorator(func: ExceptionHandler) -> ExceptionHandler:
        _handlers[exc_type] = func
        return func
    return decorator


def _handler_for(exc: Exception) -> ExceptionHandler | None:
    for cls in type(exc).__mro__:
        if cls in _handlers:
            return _handlers[cls]
    return None


@exception_handler(ConfigError)
def config_error(ex: ConfigError) -> int:
    logger.error("Configuration error", extra={"error_code": ex.error_code, "detail": ex.detail,
                                               "errors": ex.context.get("errors")})
    click.echo(f"config error: {ex.detail}", err=True)
    return ex.exit_code


@exception_handler(TrainingError)
def training_error(ex: TrainingError) -> int:
    last = ex.curve[-1] if ex.curve else None
    logger.error("Training failed", extra={"error_code": ex.error_code, "detail": ex.detail,
                                           "curve_points": len(ex.curve), "last_point": last})
    click.echo(f"training failed: {ex.detail}", err=True)
    return ex.exit_code


@exception_handler(FormatError)
def format_error(ex: FormatError) -> int:
    logger.error("Unreadable artifact", extra={"error_code": ex.error_code, "detail": ex.detail,
                                               "version": ex.context.get("version")})
    click.echo(f"format error: {ex.detail}", err=True)
    return ex.exit_code


@exception_handler(LabException)
def lab_exception(ex: LabException) -> int:
    logger.error(ex.detail, extra={"error_code": ex.error_code, "details": ex.context})
    click.echo(f"error: {ex.detail}", err=True)
    return ex.exit_code


def run(argv: list[str] | None = None) -> int:
    """Run one CLI command and map its outcome to a process exit code."""
    command = (argv if argv is not None else sys.argv[1:]) or ["--help"]
    with tracer.start_as_current_span("shiftlab", attributes={"argv": " ".join(command),
                                                              "environment": app_settings.ENVIRONMENT.value}) as span:
        try:
            result = cli.main(args=command, prog_name="shiftlab", standalone_mode=False)
            return result if isinstance(result, int) else 0
        except click.ClickException as e:
            e.show()
            return e.exit_code
        except click.exceptions.Abort:
            click.echo("aborted", err=True)
            return 1
        except Exception as e:
            span.record_exception(e)
            span.set_status(trace.Status(trace.StatusCode.ERROR, str(e)))
            handler = _handler_for(e)
            if handler is not None:
                return handler(e)
            logger.exception(e, "Command failed", extra={"argv": command, "error_type": e.__class__.__name__})
            return 1


if __name__ == "__main__":
    sys.exit(run())
