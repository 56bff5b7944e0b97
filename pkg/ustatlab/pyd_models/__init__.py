"""Pydantic v2 models for experiment configuration and report rows.

The numerical modules work on the dataclasses in ``ustatlab.core_models``;
these models sit at the file boundary where configs are read and reports are
written.
"""

from .config import ExperimentConfig
from .report import ReportRecord

__all__ = [
    "ExperimentConfig",
    "ReportRecord",
]
