"""Workload graphs: tasks bound to process groups, dependency edges, repeated steps.

File format::

    steps: 2                        # iterations; task i of step k waits for task i of step k-1
    baseline: {overlap: none}       # SPMD stream model: none | in_order
    lanes: {cube: 1, vector: 1, comm: 1, cpu: 1}
    process_groups: {...}           # optional, same schema as the process-group file
    tasks:
      - {id: attn, group: text, kind: compute, engine: cube, duration: 10ms}
      - {id: sync, group: text, kind: communication,
         collective: {kind: all_reduce, bytes_per_rank: 1048576}}
      - {id: rollout, group: actor, kind: compute, duration: 20ms, pooled: true, width: 1}
    edges:
      - [attn, sync]

A communication task takes its time from the collective cost model over the
group's ranks (or ``collective.ranks``), unless ``duration`` is given.
Pooled compute tasks may run on any ``width`` ranks of the shared pool.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .. import configio
from ..costmodel import CollectiveCall, CollectiveKind, collective_time
from ..errors import ConfigError
from ..topology import Topology
from .groups import ProcessGroupSpec, check_process_groups

TASK_KINDS = ("compute", "communication")
ENGINES = ("cube", "vector", "comm")
OVERLAP_MODES = ("none", "in_order")
DEFAULT_LANES = {"cube": 1, "vector": 1, "comm": 1, "cpu": 1}


@dataclass(frozen=True)
class CollectiveSpec:
    kind: CollectiveKind
    bytes_per_rank: float
    ranks: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Task:
    id: str
    group: str
    kind: str = "compute"
    engine: str = "cube"
    duration: float | None = None
    collective: CollectiveSpec | None = None
    pooled: bool = False
    width: int = 1

    def __post_init__(self) -> None:
        if self.kind not in TASK_KINDS:
            raise ConfigError(f"task {self.id!r}: kind must be one of {TASK_KINDS}", field="kind")
        if self.engine not in ENGINES:
            raise ConfigError(f"task {self.id!r}: engine must be one of {ENGINES}", field="engine")
        if self.kind == "compute":
            if self.engine == "comm":
                raise ConfigError(f"task {self.id!r}: compute tasks run on cube or vector", field="engine")
            if self.duration is None:
                raise ConfigError(f"task {self.id!r}: compute tasks need a duration", field="duration")
        else:
            if self.engine != "comm":
                raise ConfigError(f"task {self.id!r}: communication tasks run on the comm engine", field="engine")
            if self.pooled:
                raise ConfigError(f"task {self.id!r}: only compute tasks can be pooled", field="pooled")
            if self.duration is None and self.collective is None:
                raise ConfigError(f"task {self.id!r}: needs a collective or a duration", field="collective")
        if self.duration is not None and self.duration < 0:
            raise ConfigError(f"task {self.id!r}: duration must be non-negative", field="duration")
        if self.width < 1:
            raise ConfigError(f"task {self.id!r}: width must be >= 1", field="width")


@dataclass(frozen=True)
class WorkloadGraph:
    tasks: tuple[Task, ...]
    edges: tuple[tuple[str, str], ...] = ()
    steps: int = 1
    groups: dict[str, ProcessGroupSpec] = field(default_factory=dict)
    overlap: str = "none"
    lanes: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_LANES))

    def __post_init__(self) -> None:
        ids = [t.id for t in self.tasks]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ConfigError(f"duplicate task id(s): {', '.join(dupes)}", field="tasks")
        known = set(ids)
        for u, v in self.edges:
            for x in (u, v):
                if x not in known:
                    raise ConfigError(f"edge ({u!r}, {v!r}) references unknown task {x!r}", field="edges")
            if u == v:
                raise ConfigError(f"self-loop on task {u!r}", field="edges")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1", field="steps")
        if self.overlap not in OVERLAP_MODES:
            raise ConfigError(f"baseline overlap must be one of {OVERLAP_MODES}", field="overlap")
        for lane, count in self.lanes.items():
            if count < 1:
                raise ConfigError(f"lane count for {lane!r} must be >= 1", field="lanes")
        self.topological_order()

    @property
    def task_map(self) -> dict[str, Task]:
        return {t.id: t for t in self.tasks}

    def topological_order(self) -> list[str]:
        """Kahn's algorithm, smallest task id first among ready tasks; raises on cycles."""
        succ: dict[str, list[str]] = {t.id: [] for t in self.tasks}
        indeg = {t.id: 0 for t in self.tasks}
        for u, v in self.edges:
            succ[u].append(v)
            indeg[v] += 1
        heap = [t for t, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            u = heapq.heappop(heap)
            order.append(u)
            for v in succ[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(heap, v)
        if len(order) != len(self.tasks):
            stuck = sorted(t for t, d in indeg.items() if d > 0)
            raise ConfigError(f"workload graph has a cycle through: {', '.join(stuck)}", field="edges")
        return order

    def with_groups(self, groups: Iterable[ProcessGroupSpec]) -> "WorkloadGraph":
        return WorkloadGraph(self.tasks, self.edges, self.steps, {g.name: g for g in groups},
                             self.overlap, dict(self.lanes))

    def check_groups(self, groups: dict[str, ProcessGroupSpec] | None = None) -> None:
        groups = self.groups if groups is None else groups
        for t in self.tasks:
            if t.group not in groups:
                raise ConfigError(f"task {t.id!r} references unknown group {t.group!r}", field="group")

    def task_ranks(self, task: Task, groups: dict[str, ProcessGroupSpec] | None = None) -> tuple[int, ...]:
        groups = self.groups if groups is None else groups
        if task.kind == "communication" and task.collective is not None and task.collective.ranks:
            return task.collective.ranks
        return groups[task.group].ranks

    def task_duration(self, task: Task, topology: Topology,
                      groups: dict[str, ProcessGroupSpec] | None = None) -> float:
        if task.duration is not None:
            return task.duration
        spec = task.collective
        call = CollectiveCall(spec.kind, spec.bytes_per_rank, self.task_ranks(task, groups))
        return collective_time(call, topology)


# parsing ------------------------------------------------------------------

def _parse_task(entry: Any, index: int) -> Task:
    if not isinstance(entry, dict):
        raise configio.fail(f"tasks[{index}] must be a mapping", None, field="tasks")
    try:
        tid = str(configio.get(entry, "id", f"tasks[{index}]"))
        group = str(configio.get(entry, "group", f"tasks[{index}]"))
        kind = entry.get("kind", "compute")
        engine = entry.get("engine", "comm" if kind == "communication" else "cube")
        duration = None
        if "duration" in entry:
            duration = configio.parse_seconds(entry["duration"], "duration", entry)
        collective = None
        if "collective" in entry:
            c = configio.require_mapping(entry["collective"], "collective")
            ranks = c.get("ranks")
            nbytes = configio.parse_number(configio.get(c, "bytes_per_rank", "collective"), "bytes_per_rank", c)
            collective = CollectiveSpec(CollectiveKind.parse(configio.get(c, "kind", "collective")),
                                        float(nbytes), tuple(ranks) if ranks else None)
        pooled = bool(entry.get("pooled", False))
        width = entry.get("width", 1)
        if isinstance(width, bool) or not isinstance(width, int):
            raise configio.fail("width must be an integer", entry, "width")
        return Task(tid, group, kind, engine, duration, collective, pooled, width)
    except ConfigError as exc:
        if exc.line is None:
            raise configio.fail(exc.message, entry, exc.field if exc.field in entry else None, exc.field) from None
        raise


def parse_workload(doc: Any, groups: Iterable[ProcessGroupSpec] | None = None) -> WorkloadGraph:
    """Build a workload from a loaded document; ``groups`` overrides inline process groups."""
    if doc is None:
        doc = {}
    doc = configio.require_mapping(doc, "workload")
    tasks = [_parse_task(e, i) for i, e in enumerate(doc.get("tasks") or [])]
    edges = []
    for i, e in enumerate(doc.get("edges") or []):
        if not isinstance(e, (list, tuple)) or len(e) != 2:
            raise configio.fail(f"edges[{i}] must be a [predecessor, successor] pair", doc, "edges")
        edges.append((str(e[0]), str(e[1])))
    steps = doc.get("steps", 1)
    if isinstance(steps, bool) or not isinstance(steps, int):
        raise configio.fail("steps must be an integer", doc, "steps")
    baseline = doc.get("baseline") or {}
    overlap = baseline.get("overlap", "none") if isinstance(baseline, dict) else "none"
    lanes = dict(DEFAULT_LANES)
    lanes.update(doc.get("lanes") or {})

    if groups is None:
        inline = doc.get("process_groups")
        if inline:
            parsed, errors = check_process_groups(inline)
            if errors:
                raise errors[0]
            groups = parsed
        else:
            groups = []
    try:
        wl = WorkloadGraph(tuple(tasks), tuple(edges), steps, {g.name: g for g in groups}, overlap, lanes)
    except ConfigError as exc:
        key = {"overlap": "baseline"}.get(exc.field, exc.field)
        raise configio.fail(exc.message, doc, key if key in doc else None, exc.field) from None
    if wl.groups:
        try:
            wl.check_groups()
        except ConfigError as exc:
            raise configio.fail(exc.message, doc, "tasks", exc.field) from None
    return wl


def load_workload(path: str | Path, groups: Iterable[ProcessGroupSpec] | None = None) -> WorkloadGraph:
    return parse_workload(configio.load_file(path), groups)
