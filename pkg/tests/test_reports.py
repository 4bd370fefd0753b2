import json
import math

import numpy as np
import pytest

from src import __version__
from src.core.errors import InvalidParameterError
from src.core.reports import Report, atomic_write_text, calculate_sha256, format_value, run_metadata, write_report
from src.utils.rng import ALGORITHM_ID


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(True) == "true"
    assert format_value(None) == ""
    assert format_value(np.float64(2.5)) == "2.5"
    assert format_value(np.int64(3)) == "3"
    assert format_value(math.nan) == "nan"
    assert format_value("a2_plain") == "a2_plain"


def test_report_rejects_wrong_width():
    report = Report("demo", ("a", "b"))
    with pytest.raises(InvalidParameterError):
        report.add_row(1.0)


def test_csv_layout():
    report = Report("demo", ("N", "value"))
    report.extend([(8, 1.5), (16, 0.25)])
    assert report.to_csv() == "N,value\r\n8,1.5\r\n16,0.25\r\n"


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = atomic_write_text(tmp_path / "nested" / "file.txt", "inhalt\n")
    assert target.read_text(encoding="utf-8") == "inhalt\n"
    assert [path.name for path in target.parent.iterdir()] == ["file.txt"]


def test_write_report_with_sidecar(tmp_path):
    report = Report("demo", ("N", "value"), metadata={"note": math.inf})
    report.add_row(8, 1.0)
    paths = write_report(report, tmp_path)
    assert paths.data.name == "demo.csv"
    sidecar = json.loads(paths.sidecar.read_text(encoding="utf-8"))
    assert sidecar["sha256"] == calculate_sha256(paths.data) == paths.sha256
    assert sidecar["row_count"] == 1
    assert sidecar["metadata"]["note"] == "inf"


def test_write_report_as_json(tmp_path):
    report = Report("demo", ("N", "value"))
    report.add_row(8, 0.5)
    paths = write_report(report, tmp_path, "json")
    payload = json.loads(paths.data.read_text(encoding="utf-8"))
    assert payload == {"columns": ["N", "value"], "rows": [{"N": "8", "value": "0.5"}]}
    with pytest.raises(InvalidParameterError):
        write_report(report, tmp_path, "xml")


def test_identical_reports_are_byte_identical(tmp_path):
    def build():
        report = Report("demo", ("x",), metadata=run_metadata({"harness": {"seed": 1}}, 1, command="demo"))
        report.add_row(1 / 3)
        return report

    first = write_report(build(), tmp_path / "a")
    second = write_report(build(), tmp_path / "b")
    assert first.data.read_bytes() == second.data.read_bytes()
    assert first.sidecar.read_bytes() == second.sidecar.read_bytes()


def test_run_metadata_fields():
    meta = run_metadata({}, 7, command="gate")
    assert meta["package_version"] == __version__
    assert meta["rng_algorithm"] == ALGORITHM_ID
    assert meta["seed"] == 7
    assert meta["command"] == "gate"
