"""Run manifest written next to the reports of an experiment.

The manifest pins every emitted report file by sha256 and stores the
validated config, the seed, and the interpreter and numpy versions, so a
batch can be rerun and compared byte for byte.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import platform
import shutil
import subprocess
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import numpy as np

from ustatlab.core_models import CheckReport

logger = logging.getLogger(__name__)

_CHUNK = 1 << 16


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        while block := fh.read(_CHUNK):
            digest.update(block)
    return digest.hexdigest()


def config_sha256(payload: dict[str, Any]) -> str:
    """Hash of the canonical JSON form of a config (sorted keys, no whitespace)."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _git_commit(cwd: Path) -> str | None:
    git = shutil.which("git")
    if git is None:
        return None
    try:
        done = subprocess.run(  # noqa: S603
            [git, "rev-parse", "HEAD"], cwd=cwd, check=True, capture_output=True, text=True, timeout=2
        )
    except (OSError, subprocess.SubprocessError):
        logger.debug("no git commit for %s", cwd, exc_info=True)
        return None
    return done.stdout.strip() or None


class Tracker:
    """Artifact hashes and run metadata of one output directory."""

    def __init__(self, path: Path | str) -> None:
        self.path = Path(path)
        self.files: dict[str, dict[str, Any]] = {}
        self.meta: dict[str, Any] = {}
        if not self.path.exists():
            return
        try:
            stored = json.loads(self.path.read_text())
        except (OSError, ValueError):
            logger.warning("unreadable manifest %s, starting a new one", self.path, exc_info=True)
            return
        self.files = dict(stored.get("files", {}))
        self.meta = dict(stored.get("meta", {}))

    def track_file(self, path: Path) -> None:
        path = Path(path)
        self.files[path.name] = {"sha256": file_sha256(path), "bytes": path.stat().st_size}

    def record_config(self, payload: dict[str, Any]) -> None:
        self.meta.update(config=payload, configSha256=config_sha256(payload), seed=payload.get("seed"))

    def record_outcome(self, reports: Iterable[CheckReport]) -> None:
        """Counts of passed, failed, errored and measured-only instances."""
        counts = {"instances": 0, "passed": 0, "failed": 0, "errors": 0, "measured": 0}
        for r in reports:
            counts["instances"] += 1
            if r.error is not None:
                counts["errors"] += 1
            elif not r.asserted:
                counts["measured"] += 1
            elif r.passed:
                counts["passed"] += 1
            else:
                counts["failed"] += 1
        self.meta["outcome"] = counts

    def save(self) -> Path:
        self.meta["generatedAt"] = dt.datetime.now(dt.timezone.utc).isoformat()
        self.meta["python"] = platform.python_version()
        self.meta["numpy"] = np.__version__
        commit = _git_commit(self.path.parent)
        if commit:
            self.meta["git"] = {"commit": commit}
        self.path.write_text(json.dumps({"meta": self.meta, "files": self.files}, indent=2, sort_keys=True))
        return self.path


def compute_mismatches(tracker: Tracker) -> list[dict[str, Any]]:
    """Tracked report files that are missing or whose hash no longer matches."""
    out: list[dict[str, Any]] = []
    for name, info in sorted(tracker.files.items()):
        target = tracker.path.parent / name
        actual = file_sha256(target) if target.exists() else None
        if actual != info.get("sha256"):
            out.append({"path": name, "expected_sha256": info.get("sha256"), "actual_sha256": actual})
    return out
