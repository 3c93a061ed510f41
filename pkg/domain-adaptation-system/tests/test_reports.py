import json

import pytest

from app.core.exceptions import SchemaException
from app.repositories.report_repository import ReportRepository
from app.schemas.report import AdaptReport, EpochTrace, MetricsReport
from app.services.report_service import ReportService, environment_stamp


def _report(seconds=1.5):
    metrics = MetricsReport(top1=0.5, top3=0.75, macro_f1=0.4, confusion=[[1, 1], [0, 2]], n_eval=4)
    trace = [EpochTrace(epoch=1, steps=2, ce_loss=0.7, mcrl_loss=0.1, target_top1=0.5)]
    pretrain = AdaptReport(kind="source_only", config={}, trace=trace, wall_clock_seconds=seconds)
    return AdaptReport(
        kind="adapt", config={"lambda": 0.5}, trace=trace, total_steps=2,
        final_metrics=metrics, pretrain=pretrain, wall_clock_seconds=seconds,
    )


def test_timing_is_dropped_unless_requested():
    text = ReportService.render_json(ReportService().build_document("adapt", _report()))
    assert "wall_clock_seconds" not in text
    timed = ReportService(include_timing=True).build_document("adapt", _report())
    assert timed["report"]["wall_clock_seconds"] == 1.5
    assert timed["report"]["pretrain"]["wall_clock_seconds"] == 1.5


def test_documents_are_byte_stable_across_timings():
    service = ReportService()
    a = service.render_json(service.build_document("adapt", _report(1.0)))
    b = service.render_json(service.build_document("adapt", _report(9.0)))
    assert a == b
    document = json.loads(a)
    assert document["schema_version"] == 1
    assert document["kind"] == "adapt"
    assert set(document["environment"]) == set(environment_stamp())


def test_repository_round_trip(tmp_path):
    repo = ReportRepository(tmp_path)
    document = ReportService().build_document("adapt", _report(), {"source": "s.csv"})
    path = repo.save(document, "out/report.json")
    assert path == tmp_path / "out" / "report.json"
    assert repo.load("out/report.json") == document


def test_repository_rejects_foreign_json(tmp_path):
    (tmp_path / "x.json").write_text("[1, 2]")
    with pytest.raises(SchemaException):
        ReportRepository(tmp_path).load("x.json")


def test_tables_are_aligned():
    text = ReportService.format_table(["name", "value"], [["a", 1.0], ["longer", 22.5]])
    lines = text.splitlines()
    assert lines[0].startswith("name  ")
    assert lines[2].endswith(" 1.0000")
    assert len(lines[2]) == len(lines[3])


def test_metrics_validator_rejects_inconsistent_counts():
    with pytest.raises(ValueError):
        MetricsReport(top1=0.5, top3=0.4, macro_f1=0.1, confusion=[[1]], n_eval=1)
    with pytest.raises(ValueError):
        MetricsReport(top1=0.5, top3=0.6, macro_f1=0.1, confusion=[[1]], n_eval=2)


def test_adapt_tables_include_both_stages():
    text = ReportService().adapt_tables(_report())
    assert "stage 1 (source only)" in text
    assert "target" in text
