"""
Structured Logging Configuration
Centralized logging setup for the domain adaptation toolkit
"""
import logging
import logging.config
from typing import Dict, Any, Optional
from datetime import datetime, timezone
import json
import traceback

_RESERVED_ATTRS = set(vars(logging.makeLogRecord({}))) | {"message", "asctime", "extra_fields"}


class StructuredFormatter(logging.Formatter):
    """Custom formatter for structured JSON logging"""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as structured JSON"""
        log_entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
            "process": record.process,
        }

        # Add exception information if present
        if record.exc_info:
            log_entry["exception"] = {
                "type": record.exc_info[0].__name__ if record.exc_info[0] else None,
                "message": str(record.exc_info[1]) if record.exc_info[1] else None,
                "traceback": traceback.format_exception(*record.exc_info)
            }

        # Fields passed through ``extra=``
        extras = {k: v for k, v in record.__dict__.items() if k not in _RESERVED_ATTRS}
        if extras:
            log_entry["extra"] = extras

        # Add extra fields if present
        if hasattr(record, "extra_fields"):
            log_entry.update(record.extra_fields)

        return json.dumps(log_entry, ensure_ascii=False, default=str)


class ToolkitLogger:
    """Centralized logger registry for the toolkit"""

    _loggers: Dict[str, logging.Logger] = {}

    @classmethod
    def get_logger(cls, name: str) -> logging.Logger:
        """Get or create a logger under the ``mcrl`` namespace"""
        if name not in cls._loggers:
            cls._loggers[name] = logging.getLogger(f"mcrl.{name}")
        return cls._loggers[name]

    @classmethod
    def setup_logging(
        cls,
        level: str = "INFO",
        log_format: str = "structured",
        log_file: Optional[str] = None,
        config: Dict[str, Any] = None
    ):
        """
        Setup logging configuration

        Args:
            level: Level for the ``mcrl`` logger tree
            log_format: ``structured`` (JSON lines) or ``simple``
            log_file: Optional path of a rotating log file
            config: Overrides merged into the dictConfig
        """
        formatter = "structured" if log_format == "structured" else "simple"
        handlers = ["console"]
        default_config = {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "structured": {
                    "()": StructuredFormatter,
                },
                "simple": {
                    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
                }
            },
            "handlers": {
                "console": {
                    "class": "logging.StreamHandler",
                    "level": level,
                    "formatter": formatter,
                    # stdout is reserved for report tables
                    "stream": "ext://sys.stderr"
                }
            },
            "loggers": {
                "mcrl": {
                    "level": level,
                    "handlers": handlers,
                    "propagate": False
                }
            }
        }

        if log_file:
            default_config["handlers"]["file"] = {
                "class": "logging.handlers.RotatingFileHandler",
                "level": "DEBUG",
                "formatter": "structured",
                "filename": log_file,
                "maxBytes": 10485760,  # 10MB
                "backupCount": 5
            }
            handlers.append("file")
            default_config["loggers"]["mcrl"]["level"] = "DEBUG"

        # Merge with custom config if provided
        if config:
            default_config.update(config)

        logging.config.dictConfig(default_config)


def get_logger(name: str) -> logging.Logger:
    """Get a structured logger"""
    return ToolkitLogger.get_logger(name)


def configure_logging(level: str = "INFO", log_format: str = "structured", log_file: Optional[str] = None):
    """Configure the ``mcrl`` logger tree once per process"""
    ToolkitLogger.setup_logging(level=level, log_format=log_format, log_file=log_file)


def log_with_context(logger: logging.Logger, level: int, message: str, **context):
    """Log with additional context fields"""
    if not logger.isEnabledFor(level):
        return

    record = logger.makeRecord(
        logger.name, level, "", 0, message, (), None
    )
    record.extra_fields = {"context": context}

    logger.handle(record)
