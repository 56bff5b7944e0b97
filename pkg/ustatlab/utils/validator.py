from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any

import yaml  # type: ignore[import]
from jsonschema import ValidationError
from jsonschema import validate as jsonschema_validate  # type: ignore[import]

from .errors import ConfigError


def _load_yaml(path: Path) -> Any:
    return yaml.safe_load(path.read_text())


def registry_schema(name: str) -> dict[str, Any]:
    return json.loads(resources.files("ustatlab.registry").joinpath(name).read_text())


def validate_payload(data: Any, schema_name: str) -> None:
    """Validate ``data`` against a schema shipped in ``ustatlab/registry``.

    Raises:
        ConfigError: the payload does not match the schema.
    """
    try:
        jsonschema_validate(instance=data, schema=registry_schema(schema_name))
    except ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{schema_name}: {where}: {exc.message}") from exc


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a YAML (or JSON) experiment config and check it against ``experiment.schema.json``."""
    try:
        data = _load_yaml(Path(path))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    validate_payload(data, "experiment.schema.json")
    return data
