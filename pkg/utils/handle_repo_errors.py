import json
from functools import wraps

from constants import ERROR_CODE_FORMAT, ERROR_CORRUPT_FILE
from exceptions_handler import FormatError, LabException
from utils.logger import logger
from utils.make_repo_response import make_repo_response


def handle_repo_errors(func):
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except FormatError as fe:
            logger.error(f"{fe.detail}", extra={"error_code": fe.error_code, "details": fe.context})
            raise
        except LabException:
            raise
        except (json.JSONDecodeError, UnicodeDecodeError, KeyError, ValueError, TypeError) as de:
            result = make_repo_response("error", ERROR_CODE_FORMAT, ERROR_CORRUPT_FILE, data=str(de))
            logger.error(f"{result.message}",
                         extra={"error_code": result.error_code, "details": result.data,
                                "operation": func.__name__})
            raise FormatError(detail=f"{result.message}: {de}") from de
        except OSError as oe:
            result = make_repo_response("error", "IO_ERROR", "File could not be read or written",
                                        path=getattr(oe, "filename", None), data=str(oe))
            logger.error(f"{result.message}",
                         extra={"error_code": result.error_code, "details": result.data,
                                "operation": func.__name__})
            raise FormatError(detail=f"{result.message}: {oe}") from oe
    return wrapper
