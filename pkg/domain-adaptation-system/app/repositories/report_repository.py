"""
Report Repository
"""
import json
from pathlib import Path
from typing import Any, Dict, Union

from app.core.exceptions import InvalidArgumentException, SchemaException
from app.core.logging import get_logger
from app.services.report_service import ReportService

logger = get_logger("reports")


class ReportRepository:
    """
    File storage for report documents
    """

    def __init__(self, root: Union[str, Path, None] = None):
        """
        Args:
            root: Directory relative paths resolve against; the working directory when omitted
        """
        self.root = Path(root) if root is not None else None

    def _resolve(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        return self.root / path if self.root is not None and not path.is_absolute() else path

    def save(self, document: Dict[str, Any], path: Union[str, Path]) -> Path:
        target = self._resolve(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(ReportService.render_json(document))
        logger.info(f"Report written to {target}", extra={"kind": document.get("kind")})
        return target

    def load(self, path: Union[str, Path]) -> Dict[str, Any]:
        target = self._resolve(path)
        try:
            with open(target, encoding="utf-8") as fh:
                document = json.load(fh)
        except OSError as e:
            raise InvalidArgumentException(f"cannot read report: {e}", argument="path") from e
        except json.JSONDecodeError as e:
            raise SchemaException(f"report is not valid JSON: {e.msg}", details={"path": str(target), "line": e.lineno})
        if not isinstance(document, dict) or "schema_version" not in document or "kind" not in document:
            raise SchemaException("report document lacks schema_version/kind", details={"path": str(target)})
        return document
