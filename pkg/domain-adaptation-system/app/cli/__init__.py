"""
Command-line surface
"""
from typing import List, Optional

from app.cli.commands import COMMANDS
from app.cli.parser import build_parser
from app.config import settings
from app.core.error_handlers import run_command
from app.core.exceptions import EXIT_USAGE
from app.core.logging import configure_logging, get_logger


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse ``argv`` and run the selected subcommand

    Returns:
        Process exit code (2 for usage errors)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    configure_logging(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        log_format=args.log_format or settings.LOG_FORMAT,
        log_file=args.log_file or settings.LOG_FILE,
    )
    get_logger("cli").debug(f"Running {args.command}")
    return run_command(COMMANDS[args.command], args)


__all__ = ["main", "build_parser"]
