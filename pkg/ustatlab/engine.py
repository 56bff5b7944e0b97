"""Experiment orchestration for ustat-lab.

This module wires the check registry, the check plugins and the emitters
together. A registry entry names a plugin module by import path; the plugin
samples an instance from a per-instance random stream and evaluates it into a
``CheckReport``. ``run_experiment`` is the primary entrypoint: it evaluates
``count`` instances (optionally on a thread pool), writes JSONL/CSV reports
plus a ``manifest.json`` and returns an ``ExperimentResult``.
"""

from __future__ import annotations

import importlib
import logging
import time
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Any, Protocol, cast, runtime_checkable

import numpy as np
import yaml  # type: ignore[import]
from jsonschema import ValidationError as JsonSchemaError  # type: ignore[import]
from jsonschema import validate as jsonschema_validate  # type: ignore[import]
from pydantic import ValidationError

from .core_models import CheckEntry, CheckReport, ExperimentResult, Registry
from .emitters import emit_csv, emit_jsonl
from .pyd_models.config import ExperimentConfig
from .utils.errors import BadCheckError, ConfigError, UstatLabError
from .utils.seeding import instance_rng
from .utils.tracker import Tracker
from .utils.validator import registry_schema

logger = logging.getLogger(__name__)


def load_registry(path: Path | None = None) -> Registry:
    """Load the check registry YAML, by default the one shipped with the package.

    Each entry is validated on its own against ``checks.schema.json``; invalid
    or duplicate entries are logged as warnings and skipped.

    Raises:
        ConfigError: the file is not YAML or has no ``checks`` list.
    """
    if path is None:
        text = resources.files("ustatlab.registry").joinpath("checks.yaml").read_text()
    else:
        text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"check registry {path or 'checks.yaml'} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("checks"), list):
        raise ConfigError("check registry must be a mapping with a 'checks' list")
    entry_schema = registry_schema("checks.schema.json")["properties"]["checks"]["items"]
    checks: list[CheckEntry] = []
    seen: set[str] = set()
    for pos, entry in enumerate(data["checks"]):
        try:
            jsonschema_validate(instance=entry, schema=entry_schema)
        except JsonSchemaError as exc:
            logger.warning("skipping registry entry %d: %s", pos, exc.message)
            continue
        if entry["check_id"] in seen:
            logger.warning("skipping duplicate registry entry %r", entry["check_id"])
            continue
        seen.add(entry["check_id"])
        checks.append(
            CheckEntry(
                check_id=entry["check_id"],
                check_module=entry["check_module"],
                description=entry["description"],
                asserted=entry["asserted"],
                variant=entry.get("variant"),
            )
        )
    return Registry(checks=checks)


@runtime_checkable
class _CheckModule(Protocol):
    def sample(self, rng: np.random.Generator, config: ExperimentConfig) -> Any: ...

    def evaluate(self, instance: Any, config: ExperimentConfig) -> CheckReport: ...

    def perturb(self, instance: Any, rng: np.random.Generator, scale: float) -> Any: ...

    def adverse(self, report: CheckReport) -> float: ...


def resolve_check(check_id: str, registry: Registry | None = None) -> CheckEntry:
    """Registry entry for ``check_id``.

    Raises:
        BadCheckError: the id is not registered.
    """
    registry = registry if registry is not None else load_registry()
    entry = registry.get(check_id)
    if entry is None:
        known = ", ".join(c.check_id for c in registry.checks)
        raise BadCheckError(f"unknown check {check_id!r}; registered: {known}")
    return entry


def load_check_module(entry: CheckEntry) -> _CheckModule:
    return cast(_CheckModule, importlib.import_module(entry.check_module))


def build_config(data: Mapping[str, Any], overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Merge file keys with non-``None`` overrides and validate.

    Raises:
        ConfigError: the merged mapping is not a valid ``ExperimentConfig``.
    """
    merged = dict(data)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig(**merged)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def with_variant(config: ExperimentConfig, entry: CheckEntry) -> ExperimentConfig:
    if config.variant is None and entry.variant is not None:
        return config.model_copy(update={"variant": entry.variant})
    return config


def error_report(entry: CheckEntry, exc: Exception, params: dict[str, Any] | None = None) -> CheckReport:
    return CheckReport(
        check=entry.check_id,
        lhs=float("nan"),
        rhs=float("nan"),
        constant=float("nan"),
        ratio=float("nan"),
        passed=None,
        asserted=entry.asserted,
        params=params or {},
        error=f"{type(exc).__name__}: {exc}",
    )


def evaluate_checked(module: _CheckModule, entry: CheckEntry, instance: Any, config: ExperimentConfig) -> CheckReport:
    """Evaluate one instance; a domain error becomes an error report instead of propagating."""
    try:
        report = module.evaluate(instance, config)
    except UstatLabError as exc:
        logger.warning("check %s failed on an instance: %s", entry.check_id, exc, exc_info=True)
        return error_report(entry, exc, dict(getattr(instance, "params", {})))
    report.asserted = report.asserted and entry.asserted
    return report


def evaluate_instance(module: _CheckModule, entry: CheckEntry, config: ExperimentConfig, k: int) -> CheckReport:
    """Sample and evaluate instance ``k`` of the batch from its own stream."""
    start = time.perf_counter()
    try:
        instance = module.sample(instance_rng(config.seed, k), config)
    except UstatLabError as exc:
        logger.warning("check %s could not sample instance %d: %s", entry.check_id, k, exc, exc_info=True)
        report = error_report(entry, exc)
    else:
        report = evaluate_checked(module, entry, instance, config)
    report.seed = config.seed
    report.instance = k
    report.runtime_ms = (time.perf_counter() - start) * 1000.0
    return report


def exit_status(reports: list[CheckReport]) -> int:
    """1 when an asserted report failed, else 0; error and measured reports never fail."""
    return 1 if any(r.asserted and r.passed is False for r in reports) else 0


def emit_reports(reports: list[CheckReport], config: ExperimentConfig, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    tracker = Tracker(out_dir / "manifest.json")
    outputs: list[Path] = []
    if config.format in ("jsonl", "both"):
        outputs.append(emit_jsonl(reports, out_dir, timing=config.timing))
    if config.format in ("csv", "both"):
        outputs.append(emit_csv(reports, out_dir, timing=config.timing))
    for p in outputs:
        tracker.track_file(p)
    tracker.record_config(config.model_dump(mode="json"))
    tracker.record_outcome(reports)
    tracker.save()
    return outputs


def run_experiment(
    config: ExperimentConfig, out_dir: Path | None = None, registry: Registry | None = None
) -> ExperimentResult:
    """Evaluate ``config.count`` seeded instances of ``config.check``.

    Reports are returned and written in instance order whatever the thread
    count. ``out_dir`` falls back to ``config.out``; with neither, nothing is
    written.

    Raises:
        BadCheckError: ``config.check`` is not registered.
    """
    entry = resolve_check(config.check, registry)
    module = load_check_module(entry)
    config = with_variant(config, entry)

    def run(k: int) -> CheckReport:
        return evaluate_instance(module, entry, config, k)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            reports = list(pool.map(run, range(config.count)))
    else:
        reports = [run(k) for k in range(config.count)]
    failed = sum(1 for r in reports if r.asserted and r.passed is False)
    errors = sum(1 for r in reports if r.error is not None)
    logger.info("%s: %d instances, %d failed, %d errors", entry.check_id, len(reports), failed, errors)

    target = out_dir if out_dir is not None else (Path(config.out) if config.out else None)
    outputs = emit_reports(reports, config, target) if target is not None else []
    return ExperimentResult(reports=reports, outputs=outputs, exit_status=exit_status(reports))
