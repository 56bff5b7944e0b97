from __future__ import annotations

import math
from typing import Any

import numpy as np
from pydantic import BaseModel, Field

from ustatlab.core_models import CheckReport


def plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _finite(x: float | None) -> float | None:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


class ReportRecord(BaseModel):
    """One row of the JSONL/CSV report; non-finite numbers are written as null."""

    check: str = Field(..., description="Check id")
    seed: int | None = Field(None, description="Master seed")
    instance: int | None = Field(None, description="Instance index within the batch")
    params: dict[str, Any] = Field(default_factory=dict, description="Instance descriptor")
    lhs: float | None = Field(None, description="Left-hand side")
    rhs: float | None = Field(None, description="Right-hand side")
    constant: float | None = Field(None, description="Required constant")
    ratio: float | None = Field(None, description="Observed ratio")
    passed: bool | None = Field(None, description="Whether the inequality held; null on error")
    asserted: bool = Field(False, description="Whether failure counts toward the exit status")
    error: str | None = Field(None, description="Error message when the instance could not be evaluated")
    runtime_ms: float | None = Field(None, description="Wall time, only when timing is enabled")

    @classmethod
    def from_report(cls, report: CheckReport, timing: bool = False) -> ReportRecord:
        return cls(
            check=report.check,
            seed=report.seed,
            instance=report.instance,
            params=plain(report.params),
            lhs=_finite(report.lhs),
            rhs=_finite(report.rhs),
            constant=_finite(report.constant),
            ratio=_finite(report.ratio),
            passed=report.passed,
            asserted=report.asserted,
            error=report.error,
            runtime_ms=report.runtime_ms if timing else None,
        )
