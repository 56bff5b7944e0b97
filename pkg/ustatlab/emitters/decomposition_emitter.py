from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ustatlab.core_models import Decomposition
from ustatlab.pyd_models.report import plain


def to_payload(d: Decomposition) -> dict[str, Any]:
    return {
        "target": {"shape": list(d.target.values.shape), "values": d.target.values.tolist()},
        "lhs": d.lhs,
        "certificate_sum": d.certificate_sum,
        "disjoint": d.disjoint,
        "parts": {
            name: {
                "inner": list(d.inner[name]),
                "spec": d.specs[name].describe(),
                "certificate": d.certificates[name],
                "provenance": d.provenance.get(name, ""),
                "values": part.values.tolist(),
            }
            for name, part in d.parts.items()
        },
        "meta": plain(d.meta),
    }


def emit(
    d: Decomposition, out_dir: Path, name: str = "decomposition.json", extra: dict[str, Any] | None = None
) -> Path:
    payload = to_payload(d)
    if extra:
        payload["checks"] = plain(extra)
    p = Path(out_dir) / name
    p.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return p
