from __future__ import annotations

import csv
import json
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from ustatlab.core_models import CheckReport
from ustatlab.pyd_models.report import ReportRecord

COLUMNS = sorted(ReportRecord.model_fields)


def _cell(column: str, value: Any) -> str:
    if column == "params":
        return json.dumps(value, sort_keys=True)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit(reports: Sequence[CheckReport], out_dir: Path, name: str = "reports.csv", timing: bool = False) -> Path:
    p = Path(out_dir) / name
    with p.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(COLUMNS)
        for report in reports:
            row = ReportRecord.from_report(report, timing=timing).model_dump()
            writer.writerow([_cell(c, row[c]) for c in COLUMNS])
    return p
