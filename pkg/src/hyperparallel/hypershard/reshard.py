"""Resharding plans between two strategies of the same tensor on the same layout."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from ..costmodel import CollectiveCall, CollectiveKind, collective_time
from ..errors import ConfigError
from ..topology import Topology
from .layout import Coord, Layout, ShardStrategy


@dataclass(frozen=True)
class PlanStep:
    """One plan entry, annotated with the device-matrix axis it runs over.

    ``op`` is ``all_gather`` (un-shard ``src_dim``), ``slice`` (shard
    ``dst_dim``, local and free) or ``all_to_all`` (move the axis from
    ``src_dim`` to ``dst_dim``).  ``local_elements`` is the per-coordinate
    block size just before the step.
    """

    op: str
    axis: int
    src_dim: int | None
    dst_dim: int | None
    local_elements: int

    @property
    def kind(self) -> CollectiveKind | None:
        if self.op == "all_gather":
            return CollectiveKind.ALL_GATHER
        if self.op == "all_to_all":
            return CollectiveKind.ALL_TO_ALL
        return None

    def describe(self, layout: Layout) -> str:
        alias = layout.aliases[self.axis]
        if self.op == "all_gather":
            return f"all_gather over {alias!r} (dim {self.src_dim} -> replicated)"
        if self.op == "slice":
            return f"slice over {alias!r} (dim {self.dst_dim} sharded, local)"
        return f"all_to_all over {alias!r} (dim {self.src_dim} -> dim {self.dst_dim})"


@dataclass(frozen=True)
class CollectivePlan:
    source: ShardStrategy
    target: ShardStrategy
    steps: tuple[PlanStep, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def calls(self, layout: Layout, element_bytes: int,
              rank_binding: Mapping[Coord, int]) -> list[tuple[PlanStep, list[CollectiveCall]]]:
        """Concrete collective calls per step: one call per axis group, all concurrent."""
        out = []
        for step in self.steps:
            if step.kind is None:
                out.append((step, []))
                continue
            nbytes = step.local_elements * element_bytes
            calls = [CollectiveCall(step.kind, nbytes, tuple(rank_binding[c] for c in group))
                     for group in layout.axis_groups(step.axis)]
            out.append((step, calls))
        return out


def infer_reshard(src: ShardStrategy, dst: ShardStrategy, layout: Layout) -> CollectivePlan:
    """Plan built from all_gather / slice / all_to_all steps, in that priority.

    Axes leaving the tensor are gathered first; axes changing dimension move by
    all_to_all once their target dimension is free (a cycle is broken by
    gathering its lowest axis); axes new to the tensor are sliced last.
    """
    if src.tensor_shape != dst.tensor_shape:
        raise ConfigError(f"reshard between different shapes {src.tensor_shape} and {dst.tensor_shape}",
                          field="shape")
    for s in (src, dst):
        if any(a is not None and a >= len(layout.dims) for a in s.dim_assignment):
            raise ConfigError("strategy refers to an axis the layout does not have", field="layout")
        for dim, axis in enumerate(s.dim_assignment):
            if axis is not None and s.shard_counts[dim] != layout.dims[axis]:
                raise ConfigError("strategy was derived on a different layout", field="layout")

    shape = src.tensor_shape
    current = dict(src.axis_to_dim())   # axis -> dim
    target = dst.axis_to_dim()
    steps: list[PlanStep] = []

    def local_elements() -> int:
        return math.prod(shape[d] // (layout.dims[a] if a is not None else 1)
                         for d, a in enumerate(_dim_owner(current, len(shape))))

    for axis in sorted(a for a in current if a not in target):
        steps.append(PlanStep("all_gather", axis, current[axis], None, local_elements()))
        del current[axis]

    while True:
        moving = sorted(a for a in current if target[a] != current[a])
        if not moving:
            break
        occupied = set(current.values())
        ready = [a for a in moving if target[a] not in occupied]
        if ready:
            axis = ready[0]
            steps.append(PlanStep("all_to_all", axis, current[axis], target[axis], local_elements()))
            current[axis] = target[axis]
        else:
            axis = moving[0]
            steps.append(PlanStep("all_gather", axis, current[axis], None, local_elements()))
            del current[axis]

    for axis in sorted(a for a in target if a not in current):
        steps.append(PlanStep("slice", axis, None, target[axis], local_elements()))
        current[axis] = target[axis]

    return CollectivePlan(src, dst, tuple(steps))


def _dim_owner(axis_to_dim: Mapping[int, int], rank: int) -> list[int | None]:
    owner: list[int | None] = [None] * rank
    for axis, dim in axis_to_dim.items():
        owner[dim] = axis
    return owner


def default_binding(layout: Layout, ranks=None) -> dict[Coord, int]:
    """Row-major coordinate -> rank, optionally through an explicit rank list."""
    coords = list(layout.coordinates())
    if ranks is None:
        ranks = range(len(coords))
    ranks = list(ranks)
    if len(ranks) < len(coords):
        raise ConfigError(f"binding needs {len(coords)} ranks, got {len(ranks)}", field="ranks")
    return {c: ranks[i] for i, c in enumerate(coords)}


def reshard_cost(plan: CollectivePlan, element_bytes: int, topology: Topology, layout: Layout,
                 rank_binding: Mapping[Coord, int] | None = None) -> float:
    """Total plan time: steps run one after another, the groups within a step run concurrently."""
    if rank_binding is None:
        rank_binding = default_binding(layout)
    coords = list(layout.coordinates())
    missing = [c for c in coords if c not in rank_binding]
    if missing:
        raise ConfigError(f"rank binding does not cover coordinate {missing[0]}", field="rank_binding")
    bound = [rank_binding[c] for c in coords]
    if len(set(bound)) != len(bound):
        raise ConfigError("rank binding is not injective", field="rank_binding")
    total = 0.0
    for _, calls in plan.calls(layout, element_bytes, rank_binding):
        if calls:
            total += max(collective_time(call, topology) for call in calls)
    return total
