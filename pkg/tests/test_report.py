"""Report serialization: CSV schema, JSON summary, atomic writes, table."""

import csv
import io
import json
import math

import pytest

from gyroscale.experiments import ExperimentReport
from gyroscale.report import (
    CSV_COLUMNS,
    MixedHashError,
    atomic_write,
    read_reports,
    render_table,
    report_csv,
    report_dict,
    write_report,
)


def _report(config_hash="abc123"):
    rep = ExperimentReport("two_scale_convergence", config_hash, "0.1.0+numpy", "demo")
    rep.add(0.2, "D", 0.1 / 3.0, 1e-3, 12.5)
    rep.add(0.1, "D", 1.0 / 60.0)
    rep.add(float("nan"), "slope", 1.01)
    rep.slopes["D"] = {"slope": 1.01, "residual": 0.02, "n": 2}
    rep.check("slope", True, "slope 1.01")
    return rep.finish()


def test_csv_schema_and_exact_floats():
    rows = list(csv.reader(io.StringIO(report_csv(_report()))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert float(rows[1][3]) == 0.1 / 3.0
    assert rows[2][4] == "" and rows[3][1] == ""
    assert all(r[5] == "" for r in rows[1:])
    timed = list(csv.reader(io.StringIO(report_csv(_report(), timings=True))))
    assert timed[1][5] == "12.5" and timed[2][5] == ""


def test_json_summary_is_strict_json():
    rep = _report()
    rep.add(0.05, "h_norm", float("inf"))
    d = report_dict(rep)
    text = json.dumps(d, allow_nan=False)
    assert json.loads(text)["metrics"][-1]["value"] == "inf"
    assert d["metrics"][2]["epsilon"] is None
    assert "timings_ms" not in d
    assert report_dict(rep, timings=True)["timings_ms"] == [{"epsilon": 0.2, "metric": "D", "wall_ms": 12.5}]


def test_atomic_write_leaves_no_temporaries(tmp_path):
    p = tmp_path / "sub" / "out.txt"
    atomic_write(p, "one")
    atomic_write(p, "two")
    assert p.read_text() == "two"
    assert [q.name for q in p.parent.iterdir()] == ["out.txt"]


def test_atomic_write_keeps_old_file_on_failure(tmp_path):
    p = tmp_path / "out.txt"
    atomic_write(p, "old")

    class Boom:
        def __str__(self):
            raise RuntimeError

    with pytest.raises(TypeError):
        atomic_write(p, Boom())
    assert p.read_text() == "old"
    assert [q.name for q in tmp_path.iterdir()] == ["out.txt"]


def test_write_read_and_render(tmp_path):
    paths = write_report(_report(), tmp_path)
    assert sorted(q.suffix for q in paths) == [".csv", ".json"]
    reports = read_reports(tmp_path)
    table = render_table(reports)
    assert "two_scale_convergence" in table and "3.3333e-02" in table and "PASS slope" in table


def test_mixed_hashes_are_refused(tmp_path):
    write_report(_report("aaa"), tmp_path, "json")
    rep = _report("bbb")
    rep.experiment = "first_order"
    write_report(rep, tmp_path, "json")
    with pytest.raises(MixedHashError):
        read_reports(tmp_path)


def test_empty_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_reports(tmp_path)
    with pytest.raises(FileNotFoundError):
        read_reports(tmp_path / "absent")


def test_nan_values_are_blank():
    rep = _report()
    rep.add(0.05, "D", math.nan)
    assert report_csv(rep).splitlines()[-1].split(",")[3] == ""
