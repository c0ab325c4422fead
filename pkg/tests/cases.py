"""Seeded random case generators shared by property and acceptance tests."""

from __future__ import annotations

import random

DEVICE_MATRICES = [(1,), (2,), (4,), (8,), (2, 2), (2, 4), (4, 2), (2, 2, 2), (1, 8), (2, 1, 4), (3,), (3, 2)]
ALIASES = ("x", "y", "z")


def random_shard_case(rng: random.Random):
    """``(dims, aliases, tensor_map, shape)`` with at most 8 devices, rank <= 3 and dims <= 12."""
    dims = rng.choice(DEVICE_MATRICES)
    aliases = ALIASES[: len(dims)]
    rank = rng.randint(1, 3)
    free = list(aliases)
    rng.shuffle(free)
    tensor_map, shape = [], []
    for _ in range(rank):
        if free and rng.random() < 0.6:
            alias = free.pop()
            d = dims[aliases.index(alias)]
            tensor_map.append(alias)
            shape.append(d * rng.randint(1, 12 // d))
        else:
            tensor_map.append(None)
            shape.append(rng.randint(1, 12))
    return dims, aliases, tuple(tensor_map), tuple(shape)


def pipeline_workload(stages: int, microbatches: int, stage_time: float = 0.01):
    """Forward-only pipeline: one single-rank group per stage, GPipe-style dependencies."""
    from hyperparallel.hypermpmd import ProcessGroupSpec, Task, WorkloadGraph

    groups = {f"s{s}": ProcessGroupSpec(f"s{s}", (s,), f"Stage{s}") for s in range(stages)}
    tasks, edges = [], []
    for s in range(stages):
        for m in range(microbatches):
            tasks.append(Task(f"s{s}_m{m:02d}", f"s{s}", "compute", "cube", stage_time))
            if s:
                edges.append((f"s{s - 1}_m{m:02d}", f"s{s}_m{m:02d}"))
            if m:
                edges.append((f"s{s}_m{m - 1:02d}", f"s{s}_m{m:02d}"))
    return WorkloadGraph(tuple(tasks), tuple(edges), 1, groups)
