"""Self-describing report envelopes.

A report is::

    {"schema_version": 1,
     "tool": {"name": "hyperparallel", "version": "..."},
     "command": "compare",
     "inputs": {"cluster": "<sha256>", ...},
     "payload": {...},
     "metadata": {"generated_at": "...", "paths": {...}}}

Everything outside ``metadata`` is a pure function of the inputs; the
timestamp and file paths live in ``metadata`` so that
:func:`comparable` can drop them when checking determinism.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Mapping

from . import __version__

SCHEMA_VERSION = 1


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _clean(value: Any) -> Any:
    """JSON-safe copy: infinities become null, tuples become lists, mapping keys become strings."""
    if isinstance(value, float):
        return None if math.isinf(value) or math.isnan(value) else value
    if isinstance(value, Mapping):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):  # enums
        return value.value
    return value


def build_report(command: str, payload: Mapping[str, Any], inputs: Mapping[str, str | Path | None] | None = None,
                 extra_inputs: Mapping[str, Any] | None = None) -> dict[str, Any]:
    inputs = {k: v for k, v in (inputs or {}).items() if v is not None}
    digests = {k: file_digest(v) for k, v in sorted(inputs.items())}
    digests.update(extra_inputs or {})
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "hyperparallel", "version": __version__},
        "command": command,
        "inputs": digests,
        "payload": _clean(payload),
        "metadata": {
            "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "paths": {k: str(v) for k, v in sorted(inputs.items())},
        },
    }


def dumps(report: Mapping[str, Any]) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def comparable(report: Mapping[str, Any]) -> str:
    """Canonical text of ``report`` without its metadata, for determinism checks."""
    return dumps({k: v for k, v in report.items() if k != "metadata"})
