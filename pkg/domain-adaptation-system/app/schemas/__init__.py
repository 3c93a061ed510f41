"""
Pydantic Schemas Package
"""
from .adapt import AdaptConfig, KernelConfig, SelectionPolicy, validate_model
from .benchmark import ShiftSpec
from .report import (
    AblationCell,
    AblationGrid,
    AdaptReport,
    ChainReport,
    EpochTrace,
    GradCheckReport,
    GradCheckResult,
    MetricsReport,
    SelectionSummary,
)

__all__ = [
    # Run configuration
    "AdaptConfig",
    "KernelConfig",
    "SelectionPolicy",
    "validate_model",

    # Benchmark
    "ShiftSpec",

    # Reports
    "AblationCell",
    "AblationGrid",
    "AdaptReport",
    "ChainReport",
    "EpochTrace",
    "GradCheckReport",
    "GradCheckResult",
    "MetricsReport",
    "SelectionSummary",
]
