import csv
import json
import math

import numpy as np
import pytest

from ustatlab.core_models import CheckReport
from ustatlab.decomp import js_decompose
from ustatlab.emitters import emit_csv, emit_decomposition, emit_field, emit_jsonl, load_field
from ustatlab.emitters.field_emitter import decode, encode
from ustatlab.pyd_models.report import ReportRecord
from ustatlab.spaces import coproduct_axis, field, hilbert_axis, make_space, uniform
from ustatlab.utils.errors import BadAxisError


def _report(**kwargs) -> CheckReport:
    base = {
        "check": "rosenthal",
        "lhs": 2.0,
        "rhs": 1.5,
        "constant": 1.0,
        "ratio": 2.0 / 1.5,
        "passed": True,
        "asserted": True,
        "params": {"n": 2, "weights": [0.5, 0.5]},
        "seed": 3,
        "instance": 0,
    }
    base.update(kwargs)
    return CheckReport(**base)


def test_field_file_round_trip(tmp_path):
    base = make_space([0.25, 0.75])
    f = field((coproduct_axis(base, 3), hilbert_axis(2)), np.arange(12.0).reshape(6, 2) - 4.5)
    path = emit_field(f, tmp_path / "target")
    assert path.name == "target.npy"
    back = load_field(path)
    assert back.axes == f.axes
    assert np.array_equal(back.values, f.values)
    assert back.axes[0].blocks == 3


def test_truncated_field_file_is_rejected():
    flat = encode(field((uniform(3),), np.ones(3)))
    with pytest.raises(BadAxisError):
        decode(flat[:-1])


def test_jsonl_records_in_order_with_runtime_only_when_timed(tmp_path):
    reports = [_report(instance=k, runtime_ms=5.0) for k in range(3)]
    lines = emit_jsonl(reports, tmp_path).read_text().splitlines()
    rows = [json.loads(line) for line in lines]
    assert [r["instance"] for r in rows] == [0, 1, 2]
    assert all(r["runtime_ms"] is None for r in rows)
    assert list(rows[0]) == sorted(rows[0])
    timed = json.loads(emit_jsonl(reports, tmp_path, name="timed.jsonl", timing=True).read_text().splitlines()[0])
    assert timed["runtime_ms"] == 5.0


def test_non_finite_values_become_null():
    record = ReportRecord.from_report(_report(lhs=math.nan, ratio=math.inf, passed=None, error="TooLargeError: x"))
    assert record.lhs is None and record.ratio is None
    assert record.passed is None
    assert record.rhs == 1.5


def test_csv_columns_and_cells(tmp_path):
    path = emit_csv([_report(), _report(lhs=math.nan, passed=False, instance=1)], tmp_path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == sorted(ReportRecord.model_fields)
    assert rows[0]["passed"] == "true"
    assert rows[0]["lhs"] == "2.0"
    assert rows[0]["ratio"] == repr(2.0 / 1.5)
    assert json.loads(rows[0]["params"]) == {"n": 2, "weights": [0.5, 0.5]}
    assert rows[1]["lhs"] == ""
    assert rows[1]["passed"] == "false"
    assert rows[1]["error"] == ""


def test_decomposition_payload(tmp_path):
    base = uniform(2)
    d = js_decompose([field((base,), np.array([0.1, 3.0])), field((base,), np.array([0.5, 0.0]))], 2.0)
    path = emit_decomposition(d, tmp_path, extra={"passed": True, "ratio": math.inf})
    payload = json.loads(path.read_text())
    assert set(payload["parts"]) == {"g", "h"}
    assert payload["parts"]["h"]["inner"] == [1]
    assert payload["parts"]["g"]["provenance"]
    assert payload["target"]["shape"] == [4]
    assert payload["checks"] == {"passed": True, "ratio": None}
    assert payload["certificate_sum"] == pytest.approx(sum(p["certificate"] for p in payload["parts"].values()))
