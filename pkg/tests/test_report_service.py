"""
Unit tests for ReportService.
"""
import csv
import io
import json

import pytest

from services.report_service import ReportService, ResultRow


@pytest.fixture
def rows():
    return [
        ResultRow("pmpdc-000", "exact", objective=12.0, verdict="optimal", reference=12.0, gap=0.0,
                  wall_time=0.25, seed=0),
        ResultRow("pmpdc-000", "lagrangian", bound=11.5, verdict="bound", reference=12.0,
                  gap=0.041667, wall_time=0.5, seed=0),
    ]


def test_csv_excludes_timing_by_default(rows):
    text = ReportService().to_csv(rows)
    records = list(csv.DictReader(io.StringIO(text)))
    assert "wall_time" not in records[0]
    assert records[0]["objective"] == "12"
    assert records[1]["objective"] == ""
    assert records[1]["bound"] == "11.500000"


def test_csv_with_timing(rows):
    header = ReportService(include_timing=True).to_csv(rows).splitlines()[0]
    assert "wall_time" in header.split(",")


def test_table_is_aligned(rows):
    lines = ReportService().to_table(rows).splitlines()
    assert lines[0].startswith("instance_id")
    assert set(lines[1]) <= {"-", " "}
    assert len(lines) == 4


def test_empty_rows_still_have_header():
    text = ReportService().to_csv([])
    assert text.startswith("instance_id,solver,problem")


def test_render_rejects_unknown_format(rows):
    with pytest.raises(ValueError):
        ReportService().render(rows, "xml")


def test_key_values_formats():
    record = {"instance": "L", "objective": 2.0, "bound": float("inf"), "feasible": True}
    table = ReportService().key_values(record)
    assert "objective  2\n" in table
    assert "bound      inf\n" in table
    assert "feasible   true\n" in table
    text = ReportService().key_values(record, "csv")
    assert text.splitlines()[0] == "key,value"


def test_run_summary_includes_timing(rows):
    summary = json.loads(ReportService().run_summary({"seed": 0}, rows))
    assert summary["rows"] == 2
    assert summary["errors"] == 0
    assert summary["results"][0]["wall_time"] == 0.25
