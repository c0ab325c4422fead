"""Seeded random workloads, for property tests and ``simulate-mpmd --seed``."""

from __future__ import annotations

import random
from typing import Any

from ..costmodel import CollectiveKind
from .groups import ProcessGroupSpec
from .workload import CollectiveSpec, Task, WorkloadGraph

_KINDS = (CollectiveKind.ALL_REDUCE, CollectiveKind.ALL_GATHER, CollectiveKind.REDUCE_SCATTER,
          CollectiveKind.ALL_TO_ALL, CollectiveKind.BROADCAST)


def random_groups(rng: random.Random, device_count: int, max_groups: int = 3) -> list[ProcessGroupSpec]:
    """Disjoint groups over a prefix of the ranks, at most 8 ranks in total."""
    ranks = list(range(min(device_count, 8)))
    rng.shuffle(ranks)
    n_groups = rng.randint(1, min(max_groups, len(ranks)))
    cuts = sorted(rng.sample(range(1, len(ranks)), n_groups - 1)) if n_groups > 1 else []
    bounds = [0, *cuts, rng.randint(cuts[-1] + 1 if cuts else 1, len(ranks))]
    groups = []
    for k in range(n_groups):
        members = tuple(sorted(ranks[bounds[k]:bounds[k + 1]]))
        hardware = "CPU" if rng.random() < 0.15 else "NPU"
        groups.append(ProcessGroupSpec(f"g{k}", members, f"Module{k}", hardware))
    return groups


def random_workload(rng: random.Random | int, device_count: int = 8, max_tasks: int = 20,
                    min_tasks: int = 0, edge_prob: float = 0.3, allow_steps: bool = True) -> WorkloadGraph:
    """A random acyclic workload with groups, mixed engines, collectives and pooled tasks."""
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    groups = random_groups(rng, device_count)
    n = rng.randint(min_tasks, max_tasks)
    tasks = []
    for i in range(n):
        g = rng.choice(groups)
        tid = f"t{i:02d}"
        if rng.random() < 0.35:
            if rng.random() < 0.5:
                coll = CollectiveSpec(rng.choice(_KINDS), float(rng.choice((2**16, 2**20, 2**24))))
                tasks.append(Task(tid, g.name, "communication", "comm", collective=coll))
            else:
                tasks.append(Task(tid, g.name, "communication", "comm", duration=rng.randint(1, 8) * 1e-3))
        else:
            engine = "vector" if rng.random() < 0.3 else "cube"
            pooled = len(g.ranks) > 1 and rng.random() < 0.2
            width = rng.randint(1, len(g.ranks)) if pooled else 1
            tasks.append(Task(tid, g.name, "compute", engine, rng.randint(1, 10) * 1e-3, pooled=pooled, width=width))
    edges = [(tasks[a].id, tasks[b].id) for a in range(n) for b in range(a + 1, n) if rng.random() < edge_prob]
    steps = rng.choice((1, 1, 2)) if allow_steps else 1
    overlap = rng.choice(("none", "in_order"))
    return WorkloadGraph(tuple(tasks), tuple(edges), steps, {g.name: g for g in groups}, overlap)


def workload_document(workload: WorkloadGraph) -> dict[str, Any]:
    """The file-format mapping for ``workload`` (inverse of ``parse_workload``)."""
    tasks = []
    for t in workload.tasks:
        entry: dict[str, Any] = {"id": t.id, "group": t.group, "kind": t.kind, "engine": t.engine}
        if t.duration is not None:
            entry["duration"] = t.duration
        if t.collective is not None:
            c: dict[str, Any] = {"kind": t.collective.kind.value, "bytes_per_rank": t.collective.bytes_per_rank}
            if t.collective.ranks:
                c["ranks"] = list(t.collective.ranks)
            entry["collective"] = c
        if t.pooled:
            entry["pooled"] = True
            entry["width"] = t.width
        tasks.append(entry)
    return {
        "steps": workload.steps,
        "baseline": {"overlap": workload.overlap},
        "lanes": dict(workload.lanes),
        "process_groups": {name: {"ranks": list(g.ranks), "module": g.module_id, "hardware": g.hardware_class}
                           for name, g in workload.groups.items()},
        "tasks": tasks,
        "edges": [list(e) for e in workload.edges],
    }
