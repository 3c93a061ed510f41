"""
Base Runner Class
All run units (grid cells, pipeline stages) inherit from this base class
"""
from abc import ABC, abstractmethod
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, Optional

from app.core.exceptions import AdaptationToolkitException
from app.core.logging import get_logger


class RunnerStatus(str, Enum):
    """Runner status enumeration"""
    IDLE = "idle"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class BaseRunner(ABC):
    """
    Abstract base class for a unit of training work
    """

    def __init__(self, runner_id: str, name: str = None):
        """
        Initialize base runner

        Args:
            runner_id: Unique identifier for the runner
            name: Human-readable name, e.g. a policy label
        """
        self.runner_id = runner_id
        self.name = name or runner_id
        self.status = RunnerStatus.IDLE
        self.logger = get_logger(f"runner.{runner_id}")
        self.start_time: Optional[datetime] = None
        self.end_time: Optional[datetime] = None

    @abstractmethod
    def execute_task(self, task_data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Execute the unit of work

        Args:
            task_data: Input data for the task

        Returns:
            Task result
        """

    def run(self, task_data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Run with error handling and status management

        Toolkit errors are returned as an error dictionary; anything else propagates.
        """
        try:
            if not self.validate_input(task_data):
                raise AdaptationToolkitException("invalid task input", error_code="INVALID_TASK")

            self.status = RunnerStatus.RUNNING
            self.start_time = datetime.now(timezone.utc)
            self.logger.info(f"Runner {self.name} started")

            result = self.execute_task(task_data)

            self.status = RunnerStatus.COMPLETED
            self.end_time = datetime.now(timezone.utc)
            self.logger.info(f"Runner {self.name} completed", extra={"duration": self.duration})
            return result

        except AdaptationToolkitException as e:
            self.logger.error(f"Runner {self.name} failed: {e.message}", extra={"error_code": e.error_code})
            return self.handle_error(e)

    def validate_input(self, data: Dict[str, Any]) -> bool:
        return isinstance(data, dict) and len(data) > 0

    def handle_error(self, error: AdaptationToolkitException) -> Dict[str, Any]:
        self.status = RunnerStatus.FAILED
        self.end_time = datetime.now(timezone.utc)
        return {
            "runner_id": self.runner_id,
            "name": self.name,
            "status": "error",
            "error_code": error.error_code,
            "error_message": error.message,
        }

    @property
    def duration(self) -> Optional[float]:
        if self.start_time and self.end_time:
            return (self.end_time - self.start_time).total_seconds()
        return None

    def get_status(self) -> Dict[str, Any]:
        return {
            "runner_id": self.runner_id,
            "name": self.name,
            "status": self.status.value,
            "start_time": self.start_time.isoformat() if self.start_time else None,
            "end_time": self.end_time.isoformat() if self.end_time else None,
            "duration": self.duration,
        }
