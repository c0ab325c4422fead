"""Process-group mappings (node-to-module configuration).

Accepted document shape, mirroring the in-code dictionary form::

    process_groups:
      text:           {ranks: [0, 1], module: TextModule, hardware: NPU}
      image:          {ranks: [2, 3], module: ImageModule, hardware: NPU}
      audio:          {ranks: [4],    module: AudioModule, hardware: CPU}
      fusion:         {ranks: [5],    module: CrossModalFusion, hardware: NPU}
      task_scheduler: {ranks: [6],    module: TaskPriorityScheduler, hardware: CPU}

The top-level ``process_groups`` key may be omitted.  ``module`` is kept as an
opaque identifier.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .. import configio
from ..errors import ConfigError
from ..topology import Topology

HARDWARE_CLASSES = ("NPU", "CPU")


@dataclass(frozen=True)
class ProcessGroupSpec:
    name: str
    ranks: tuple[int, ...]
    module_id: str
    hardware_class: str = "NPU"

    def __post_init__(self) -> None:
        object.__setattr__(self, "ranks", tuple(self.ranks))
        if not self.ranks:
            raise ConfigError(f"group {self.name!r}: ranks must not be empty", field="ranks")
        for r in self.ranks:
            if isinstance(r, bool) or not isinstance(r, int) or r < 0:
                raise ConfigError(f"group {self.name!r}: invalid rank {r!r}", field="ranks")
        if len(set(self.ranks)) != len(self.ranks):
            raise ConfigError(f"group {self.name!r}: duplicate ranks {list(self.ranks)}", field="ranks")
        if self.hardware_class not in HARDWARE_CLASSES:
            raise ConfigError(
                f"group {self.name!r}: unknown hardware class {self.hardware_class!r} "
                f"(expected one of {', '.join(HARDWARE_CLASSES)})", field="hardware")

    def to_dict(self) -> dict[str, Any]:
        return {"ranks": list(self.ranks), "module": self.module_id, "hardware": self.hardware_class}


def _overlaps(groups: list[ProcessGroupSpec]) -> list[tuple[str, str, int]]:
    owner: dict[int, str] = {}
    clashes = []
    for g in groups:
        for r in g.ranks:
            if r in owner:
                clashes.append((owner[r], g.name, r))
            else:
                owner[r] = g.name
    return clashes


def check_process_groups(doc: Any) -> tuple[list[ProcessGroupSpec], list[ConfigError]]:
    """Parse what can be parsed and collect every problem instead of stopping at the first."""
    errors: list[ConfigError] = []
    if isinstance(doc, dict) and "process_groups" in doc:
        doc = doc["process_groups"]
    if not isinstance(doc, dict) or not doc:
        return [], [configio.fail("process-group document must be a non-empty mapping", doc,
                                  field="process_groups")]
    groups: list[ProcessGroupSpec] = []
    for name, entry in doc.items():
        if not isinstance(entry, dict):
            errors.append(configio.fail(f"group {name!r} must be a mapping", doc, name))
            continue
        missing = [k for k in ("ranks", "module", "hardware") if k not in entry]
        if missing:
            errors.append(configio.fail(f"group {name!r}: missing field(s) {', '.join(missing)}", doc, name))
            continue
        ranks = entry["ranks"]
        if not isinstance(ranks, list):
            errors.append(configio.fail(f"group {name!r}: ranks must be a list", entry, "ranks"))
            continue
        try:
            groups.append(ProcessGroupSpec(str(name), tuple(ranks), str(entry["module"]), str(entry["hardware"])))
        except ConfigError as exc:
            key = "hardware" if exc.field == "hardware" else "ranks"
            errors.append(configio.fail(exc.message, entry, key))
    for first, second, rank in _overlaps(groups):
        errors.append(configio.fail(
            f"overlapping ranks: groups {first!r} and {second!r} both contain rank {rank}",
            doc.get(second) if isinstance(doc.get(second), dict) else doc, "ranks", "ranks"))
    return groups, errors


def parse_process_groups(text: str | Any, source: str | None = None) -> list[ProcessGroupSpec]:
    """Parse a process-group document (text or an already-loaded mapping)."""
    doc = configio.loads(text, source) if isinstance(text, str) else text
    groups, errors = check_process_groups(doc)
    if errors:
        raise errors[0]
    return groups


def load_process_groups(path: str | Path) -> list[ProcessGroupSpec]:
    return parse_process_groups(configio.load_file(path))


def validate_against_topology(groups: list[ProcessGroupSpec], topology: Topology) -> list[ConfigError]:
    errors = []
    for g in groups:
        for r in g.ranks:
            if r >= topology.device_count:
                errors.append(ConfigError(
                    f"group {g.name!r}: rank {r} is outside the cluster's {topology.device_count} ranks",
                    field="ranks"))
    return errors
