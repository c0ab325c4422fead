"""Offline HBM residency planning with Belady eviction.

Residency model
    ``residency[i]`` is the set of blocks in HBM while step ``i`` computes; it
    must fit ``hbm_capacity_per_device``.  Before step 0, pinned blocks and then
    pre-existing blocks in first-use order are placed while they fit (this
    initial placement is not a transfer).  A block whose first access writes it
    without reading it is created in HBM at that step.

Eviction
    When a step's blocks do not fit, the resident block (not pinned, not used
    by this step) whose next use is farthest away leaves; ties prefer blocks
    needing no write-back, then the larger id.  Leaving is free unless the
    block was written and is used again, in which case it is written back.

Prefetch timing
    A block loaded for step ``i`` is prefetched at step
    ``max(0, i - lookahead, step it last left HBM)``; issue steps are then made
    non-decreasing in need order so the single transfer lane serves prefetches
    in exactly the order they are needed.  Buffers for in-flight prefetches are
    staging space and are not counted in ``residency``.
"""

from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass, field
from typing import Iterator

from ..errors import ConfigError, InfeasibleError
from ..topology import Topology
from .model import AccessSequence


@dataclass(frozen=True)
class Prefetch:
    block: str
    issue_step: int
    need_step: int


@dataclass(frozen=True)
class Offload:
    block: str
    issue_step: int
    writeback: bool


@dataclass(frozen=True)
class MemoryPlan:
    capacity: int
    lookahead: int
    initial: frozenset[str]
    residency: tuple[frozenset[str], ...]
    prefetches: tuple[Prefetch, ...]
    offloads: tuple[Offload, ...]
    allocations: tuple[tuple[str, int], ...] = field(default=())

    @property
    def operator_count(self) -> int:
        return len(self.prefetches) + len(self.offloads)

    @property
    def transfer_count(self) -> int:
        return len(self.prefetches) + sum(1 for o in self.offloads if o.writeback)

    def annotated(self, seq: AccessSequence) -> Iterator[tuple[str, int, str]]:
        """Operators interleaved with steps: ``("offload"|"prefetch"|"compute", step, block-or-label)``."""
        for i, step in enumerate(seq.steps):
            for o in self.offloads:
                if o.issue_step == i:
                    yield ("offload", i, o.block)
            for p in self.prefetches:
                if p.issue_step == i:
                    yield ("prefetch", i, p.block)
            yield ("compute", i, step.label)

    def resident_bytes(self, seq: AccessSequence) -> list[int]:
        return [sum(seq.blocks[b].size for b in res) for res in self.residency]


_INF = float("inf")


class _Desc:
    """String wrapper with reversed ordering, so a min-heap pops the larger id first."""

    __slots__ = ("value",)

    def __init__(self, value: str) -> None:
        self.value = value

    def __lt__(self, other: "_Desc") -> bool:
        return self.value > other.value

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _Desc) and self.value == other.value


def _scan(seq: AccessSequence) -> tuple[dict[str, list[int]], dict[str, int]]:
    """Use steps per block, and blocks created (first access writes without reading) with their step."""
    uses: dict[str, list[int]] = {b: [] for b in seq.blocks}
    created: dict[str, int] = {}
    for i, step in enumerate(seq.steps):
        for b in step.touched:
            if not uses[b] and b in step.blocks_written and b not in step.blocks_read:
                created[b] = i
            uses[b].append(i)
    return uses, created


def _uses(seq: AccessSequence) -> dict[str, list[int]]:
    return _scan(seq)[0]


def _next_use(uses: list[int], after: int) -> float:
    k = bisect.bisect_right(uses, after)
    return uses[k] if k < len(uses) else _INF


def created_blocks(seq: AccessSequence) -> dict[str, int]:
    """Blocks whose first access writes without reading, mapped to that step."""
    return _scan(seq)[1]


def initial_residency(seq: AccessSequence, capacity: int, scan=None) -> frozenset[str]:
    uses, created = _scan(seq) if scan is None else scan
    resident: list[str] = []
    used = 0
    pinned = sorted(b for b, blk in seq.blocks.items() if blk.pinned)
    for b in pinned:
        used += seq.blocks[b].size
        resident.append(b)
    if used > capacity:
        raise InfeasibleError(f"pinned blocks need {used} bytes but HBM holds {capacity}")
    order = sorted((uses[b][0], b) for b in seq.blocks if uses[b] and b not in created and b not in resident)
    for _, b in order:
        size = seq.blocks[b].size
        if used + size <= capacity:
            resident.append(b)
            used += size
    return frozenset(resident)


def plan_offload(seq: AccessSequence, topology: Topology | int, lookahead: int = 1) -> MemoryPlan:
    capacity = topology if isinstance(topology, int) else topology.hbm_capacity_per_device
    if lookahead < 1:
        raise ConfigError("lookahead must be >= 1", field="lookahead")
    for b, blk in sorted(seq.blocks.items()):
        if blk.size > capacity:
            raise InfeasibleError(f"block {b!r} ({blk.size} bytes) exceeds HBM capacity ({capacity} bytes)")

    uses, created = scan = _scan(seq)
    initial = initial_residency(seq, capacity, scan)
    sizes = {b: blk.size for b, blk in seq.blocks.items()}
    pinned = {b for b, blk in seq.blocks.items() if blk.pinned}
    resident = set(initial)
    used = sum(sizes[b] for b in resident)
    dirty: set[str] = set()
    left_at: dict[str, list[int]] = {}
    loads: list[tuple[int, str]] = []
    offloads: list[Offload] = []
    allocations: list[tuple[str, int]] = []
    residency: list[frozenset[str]] = []
    # lazy max-heap of eviction candidates; an entry is live while its version matches
    heap: list[tuple[float, bool, _Desc, int]] = []
    version: dict[str, int] = {}

    def push(b: str, after: int) -> None:
        if b in pinned:
            return
        v = version[b] = version.get(b, 0) + 1
        nu = _next_use(uses[b], after)
        heapq.heappush(heap, (-nu, b in dirty and nu != _INF, _Desc(b), v))

    for b in sorted(resident):
        push(b, -1)

    for i, step in enumerate(seq.steps):
        needed = set(step.touched)
        need_bytes = sum(sizes[b] for b in needed)
        if need_bytes > capacity:
            raise InfeasibleError(f"step {i} ({step.label}) touches {need_bytes} bytes; HBM holds {capacity}")
        held: list = []
        for b in sorted(needed - resident):
            size = sizes[b]
            while used + size > capacity:
                victim = None
                while heap:
                    entry = heapq.heappop(heap)
                    v = entry[2].value
                    if v not in resident or version.get(v) != entry[3]:
                        continue
                    if v in needed:
                        held.append(entry)
                        continue
                    victim = v
                    break
                if victim is None:
                    raise InfeasibleError(f"step {i} ({step.label}) does not fit beside the pinned blocks")
                later = _next_use(uses[victim], i) != _INF
                offloads.append(Offload(victim, i, victim in dirty and later))
                resident.discard(victim)
                dirty.discard(victim)
                version[victim] = version.get(victim, 0) + 1
                used -= sizes[victim]
                left_at.setdefault(victim, []).append(i)
            resident.add(b)
            used += size
            if created.get(b) == i:
                allocations.append((b, i))
            else:
                loads.append((i, b))
        dirty.update(step.blocks_written)
        for entry in held:
            heapq.heappush(heap, entry)
        for b in sorted(needed):
            push(b, i)
        residency.append(frozenset(resident))

    prefetches = []
    floor = 0
    for need, b in sorted(loads):
        departures = left_at.get(b, [])
        k = bisect.bisect_right(departures, need)
        issue = max(0, need - lookahead, departures[k - 1] if k else 0, floor)
        floor = issue
        prefetches.append(Prefetch(b, issue, need))
    return MemoryPlan(capacity, lookahead, initial, tuple(residency), tuple(prefetches),
                      tuple(offloads), tuple(allocations))

