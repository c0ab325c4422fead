"""Event traces.

The native format is newline-delimited JSON, one object per busy interval::

    {"rank": 0, "lane": "cube", "task": "attn@0", "kind": "compute", "start": 0.0, "end": 0.005}

Times are seconds.  Records are sorted by ``(rank, start, lane, task)`` so a
trace is byte-identical across runs.  :func:`to_chrome` converts the same
records to the Chrome trace-event JSON understood by ``chrome://tracing`` and
Perfetto (microsecond timestamps, one thread per lane).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

FIELDS = ("rank", "lane", "task", "kind", "start", "end")


def _sorted(records: Iterable[dict[str, Any]]) -> list[dict[str, Any]]:
    return sorted(records, key=lambda r: (r["rank"], r["start"], r["lane"], r["task"], r["end"]))


def dumps_ndjson(records: Iterable[dict[str, Any]]) -> str:
    lines = [json.dumps({k: r[k] for k in FIELDS}) for r in _sorted(records)]
    return "".join(line + "\n" for line in lines)


def write_ndjson(records: Iterable[dict[str, Any]], path: str | Path) -> None:
    Path(path).write_text(dumps_ndjson(records), encoding="utf-8")


def read_ndjson(path: str | Path) -> list[dict[str, Any]]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out


def to_chrome(records: Iterable[dict[str, Any]], process_name: str = "hyperparallel") -> dict[str, Any]:
    events = []
    for r in _sorted(records):
        events.append({"name": r["task"], "cat": r["kind"], "ph": "X", "pid": r["rank"], "tid": r["lane"],
                       "ts": r["start"] * 1e6, "dur": (r["end"] - r["start"]) * 1e6})
    return {"traceEvents": events, "displayTimeUnit": "ms", "otherData": {"source": process_name}}
