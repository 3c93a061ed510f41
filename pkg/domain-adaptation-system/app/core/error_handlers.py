"""
Global Error Handlers
Centralized error handling for CLI commands
"""
import sys
import traceback
from typing import Callable, TextIO

from app.core.exceptions import (
    AdaptationToolkitException,
    ConfigValidationException,
    DatasetParseException,
    InvalidArgumentException,
    SchemaException,
    EXIT_OK,
    EXIT_UNHANDLED,
    convert_to_exit_code,
)
from app.core.logging import get_logger

logger = get_logger("error_handler")

# Errors caused by user input rather than by the toolkit
INPUT_ERRORS = (ConfigValidationException, InvalidArgumentException, DatasetParseException, SchemaException)


def report_error(exc: AdaptationToolkitException, stream: TextIO = None) -> int:
    """Log a toolkit exception, print a one-line message and return its exit code"""
    stream = stream or sys.stderr
    code = convert_to_exit_code(exc)
    log = logger.warning if isinstance(exc, INPUT_ERRORS) else logger.error
    log(
        f"{type(exc).__name__}: {exc.message}",
        extra={"error_code": exc.error_code, "details": exc.details, "exit_code": code}
    )
    print(f"error [{exc.error_code}]: {exc.message}", file=stream)
    return code


def run_command(handler: Callable[..., int], *args, **kwargs) -> int:
    """
    Execute a command handler and translate failures into exit codes

    Args:
        handler: Command function returning an exit code (or None for success)

    Returns:
        Process exit code
    """
    try:
        code = handler(*args, **kwargs)
        return EXIT_OK if code is None else code
    except AdaptationToolkitException as exc:
        return report_error(exc)
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return 130
    except Exception as exc:
        logger.critical(
            f"Unhandled exception: {exc}",
            extra={"exception_type": type(exc).__name__, "traceback": traceback.format_exc()}
        )
        print(f"error [INTERNAL_ERROR]: {exc}", file=sys.stderr)
        return EXIT_UNHANDLED
