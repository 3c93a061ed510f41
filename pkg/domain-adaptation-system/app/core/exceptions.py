"""
Custom Exceptions for the Domain Adaptation Toolkit
Centralized exception handling
"""
from typing import Optional, Dict, Any


class AdaptationToolkitException(Exception):
    """Base exception for the toolkit"""

    def __init__(
        self,
        message: str,
        error_code: str = "GENERAL_ERROR",
        details: Optional[Dict[str, Any]] = None
    ):
        self.message = message
        self.error_code = error_code
        self.details = details if details is not None else {}
        super().__init__(self.message)


class InvalidArgumentException(AdaptationToolkitException):
    """Bad input value (non-finite numbers, out-of-range labels or K, empty inputs)"""

    def __init__(self, message: str, argument: str = None, details: Optional[Dict[str, Any]] = None):
        details = details if details is not None else {}
        if argument:
            details["argument"] = argument
        super().__init__(
            message=message,
            error_code="INVALID_ARGUMENT",
            details=details
        )


class ContractViolationException(AdaptationToolkitException):
    """Shape or dimension mismatch between cooperating arrays"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="CONTRACT_VIOLATION",
            details=details
        )


class CheckpointIOException(AdaptationToolkitException):
    """Checkpoint file could not be read or written"""

    def __init__(self, message: str, path: str = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="CHECKPOINT_IO_ERROR",
            details={**details, "path": path} if details else {"path": path}
        )


class CorruptCheckpointException(AdaptationToolkitException):
    """Checkpoint file is truncated or malformed"""

    def __init__(self, message: str, path: str = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="CORRUPT_CHECKPOINT",
            details={**details, "path": path} if details else {"path": path}
        )


class CheckpointVersionException(AdaptationToolkitException):
    """Checkpoint written with an unsupported format version"""

    def __init__(self, message: str, found: int = None, expected: int = None):
        super().__init__(
            message=message,
            error_code="CHECKPOINT_VERSION_MISMATCH",
            details={"found": found, "expected": expected}
        )


class DimensionMismatchException(AdaptationToolkitException):
    """Model dimensions do not fit the dataset they are bound to"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="DIMENSION_MISMATCH",
            details=details
        )


class DatasetParseException(AdaptationToolkitException):
    """Malformed row in an embedding CSV file"""

    def __init__(self, message: str, line: int, path: str = None):
        super().__init__(
            message=f"line {line}: {message}",
            error_code="DATASET_PARSE_ERROR",
            details={"line": line, "path": path}
        )
        self.line = line


class SchemaException(AdaptationToolkitException):
    """CSV header or row width does not match the expected schema"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="SCHEMA_ERROR",
            details=details
        )


class ConfigValidationException(AdaptationToolkitException):
    """Run configuration failed validation"""

    def __init__(self, message: str, field: str = None, details: Optional[Dict[str, Any]] = None):
        details = details if details is not None else {}
        if field:
            details["field"] = field
        super().__init__(
            message=message,
            error_code="CONFIG_VALIDATION_ERROR",
            details=details
        )


class EmptyClusterSignal(AdaptationToolkitException):
    """A weighted set has zero total weight; the caller skips the MMD term"""

    def __init__(self, message: str = "weighted set has zero total weight", details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="EMPTY_CLUSTER",
            details=details
        )


class StageException(AdaptationToolkitException):
    """A stage of a chained adaptation run failed"""

    def __init__(self, message: str, stage_index: int, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=f"stage {stage_index}: {message}",
            error_code="STAGE_ERROR",
            details={**details, "stage_index": stage_index} if details else {"stage_index": stage_index}
        )
        self.stage_index = stage_index


# Process exit code mappings
EXIT_OK = 0
EXIT_UNHANDLED = 1
EXIT_USAGE = 2
EXIT_CHECK_FAILED = 14

EXCEPTION_EXIT_CODE_MAP = {
    InvalidArgumentException: 3,
    ContractViolationException: 4,
    CheckpointIOException: 5,
    CorruptCheckpointException: 6,
    CheckpointVersionException: 7,
    DimensionMismatchException: 8,
    DatasetParseException: 9,
    SchemaException: 10,
    ConfigValidationException: 11,
    StageException: 12,
    EmptyClusterSignal: 13,
    AdaptationToolkitException: EXIT_UNHANDLED,
}


def convert_to_exit_code(exc: AdaptationToolkitException) -> int:
    """Convert custom exception to a process exit code"""
    return EXCEPTION_EXIT_CODE_MAP.get(type(exc), EXIT_UNHANDLED)
