from __future__ import annotations

import json
from collections.abc import Sequence
from pathlib import Path

from ustatlab.core_models import CheckReport
from ustatlab.pyd_models.report import ReportRecord


def emit(reports: Sequence[CheckReport], out_dir: Path, name: str = "reports.jsonl", timing: bool = False) -> Path:
    p = Path(out_dir) / name
    with p.open("w", encoding="utf-8") as f:
        for report in reports:
            record = ReportRecord.from_report(report, timing=timing)
            f.write(json.dumps(record.model_dump(), sort_keys=True) + "\n")
    return p
