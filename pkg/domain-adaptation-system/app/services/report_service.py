"""
Report Service
Structured report documents and aligned text tables
"""
import json
import platform
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pydantic
import scipy
from pydantic import BaseModel

from app.config import settings
from app.schemas.report import AblationGrid, AdaptReport, ChainReport, GradCheckReport, MetricsReport

TIMING_FIELD = "wall_clock_seconds"


def environment_stamp() -> Dict[str, str]:
    """Library versions the numbers in a report depend on"""
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


def _drop_timing(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _drop_timing(v) for k, v in value.items() if k != TIMING_FIELD}
    if isinstance(value, list):
        return [_drop_timing(v) for v in value]
    return value


class ReportService:
    """
    Service for turning run results into report documents and tables
    """

    def __init__(self, include_timing: bool = False):
        self.include_timing = include_timing
        self.schema_version = settings.REPORT_SCHEMA_VERSION

    def build_document(self, kind: str, payload: BaseModel, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Wrap a result in the versioned report envelope

        Args:
            kind: Report kind (source_only, adapt, chain, evaluate, grid, gradcheck)
            payload: Result model
            extra: Additional top-level fields such as input paths

        Returns:
            JSON-ready dictionary
        """
        body = payload.model_dump(mode="json", by_alias=True)
        if not self.include_timing:
            body = _drop_timing(body)
        document = {
            "schema_version": self.schema_version,
            "kind": kind,
            "environment": environment_stamp(),
            "report": body,
        }
        if extra:
            document["inputs"] = extra
        return document

    @staticmethod
    def render_json(document: Dict[str, Any]) -> str:
        """Serialize with sorted keys so equal runs give equal bytes"""
        return json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n"

    # Tables

    @staticmethod
    def format_table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
        """Left-align text columns, right-align numeric ones"""
        cells = [[_cell(v) for v in row] for row in rows]
        widths = [len(h) for h in headers]
        for row in cells:
            for i, cell in enumerate(row):
                widths[i] = max(widths[i], len(cell))

        numeric = [
            bool(rows) and all(isinstance(row[i], (int, float)) or row[i] is None for row in rows)
            for i in range(len(headers))
        ]

        def line(values: Sequence[str]) -> str:
            return "  ".join(
                v.rjust(widths[i]) if numeric[i] else v.ljust(widths[i])
                for i, v in enumerate(values)
            ).rstrip()

        out = [line(headers), line(["-" * w for w in widths])]
        out.extend(line(row) for row in cells)
        return "\n".join(out) + "\n"

    def metrics_table(self, metrics: MetricsReport, title: str = "metrics") -> str:
        rows = [[title, metrics.n_eval, _pct(metrics.top1), _pct(metrics.top3), _pct(metrics.macro_f1)]]
        return self.format_table(["set", "n", "top1%", "top3%", "macro_f1%"], rows)

    def trace_table(self, report: AdaptReport) -> str:
        rows = [
            [
                e.epoch, e.ce_loss, e.mcrl_loss, e.lambda_effective, e.active_class_rate,
                e.mean_clusters_per_sample, e.degenerate_steps,
                _pct(e.target_top1), _pct(e.target_top3), _pct(e.target_macro_f1),
            ]
            for e in report.trace
        ]
        headers = ["epoch", "ce", "mcrl", "lambda", "active", "clusters", "degen", "top1%", "top3%", "f1%"]
        return self.format_table(headers, rows)

    def adapt_tables(self, report: AdaptReport) -> str:
        parts = []
        if report.pretrain is not None:
            parts.append("stage 1 (source only)\n" + self.trace_table(report.pretrain))
        parts.append(f"{report.kind}\n" + self.trace_table(report))
        if report.final_metrics is not None:
            parts.append(self.metrics_table(report.final_metrics, "target"))
        if report.source_metrics is not None:
            parts.append(self.metrics_table(report.source_metrics, "source"))
        return "\n".join(parts)

    def chain_tables(self, report: ChainReport) -> str:
        rows = [
            [
                i,
                _pct(stage.final_metrics.top1) if stage.final_metrics else None,
                stage.degenerate_steps,
                report.checkpoints[i] or "-",
            ]
            for i, stage in enumerate(report.stages)
        ]
        text = self.format_table(["stage", "top1%", "degen", "checkpoint"], rows)
        if report.final_metrics is not None:
            text += "\n" + self.metrics_table(report.final_metrics, "last target")
        return text

    def grid_table(self, grid: AblationGrid) -> str:
        rows = []
        for cell in grid.rows:
            rows.append(
                [cell.row]
                + [_pct(v) for v in cell.per_seed_top1]
                + [_pct(cell.mean_top1), cell.error or ""]
            )
        headers = ["policy"] + [f"seed {s}" for s in grid.seeds] + ["mean top1%", "error"]
        return self.format_table(headers, rows)

    def gradcheck_table(self, report: GradCheckReport) -> str:
        rows = [
            [r.suite, r.instances, f"{r.max_relative_error:.3e}", "ok" if r.passed else "FAIL"]
            for r in report.results
        ]
        return self.format_table(["suite", "instances", "max rel err", "status"], rows)


def _pct(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(100.0 * value, 2)


def _cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.4f}" if abs(value) < 1000 else f"{value:.4g}"
    return str(value)


def summary_lines(document: Dict[str, Any]) -> List[str]:
    """Header lines printed above a table"""
    env = document["environment"]
    return [
        f"report: {document['kind']} (schema v{document['schema_version']})",
        f"python {env['python']}, numpy {env['numpy']}, scipy {env['scipy']}",
    ]
