"""Timing a memory plan against compute.

Prefetches run on the device's host-to-device transfer lane in plan order,
write-backs on the device-to-host lane (the link is full duplex).  Transfers
issued at step ``k`` become eligible when step ``k`` could first start (the end
of step ``k-1``).  A step starts once the previous step is done and every
block it loads has arrived; the wait beyond the previous step's end is its
stall.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..errors import IntegrityError
from ..hypermpmd.timeline import Interval
from ..topology import Topology
from .model import AccessSequence
from .planner import MemoryPlan, created_blocks


@dataclass(frozen=True)
class OffloadReport:
    total_stall: float
    step_time_with_offload: float
    step_time_without_offload: float
    hbm_peak: int
    hbm_capacity: int
    transfer_count: int
    transfer_bytes: int
    prefetch_count: int
    writeback_count: int
    step_stalls: tuple[float, ...] = ()
    trace: tuple[Interval, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "total_stall": self.total_stall,
            "step_time_with_offload": self.step_time_with_offload,
            "step_time_without_offload": self.step_time_without_offload,
            "hbm_peak": self.hbm_peak,
            "hbm_capacity": self.hbm_capacity,
            "transfers": {"count": self.transfer_count, "bytes": self.transfer_bytes,
                          "prefetches": self.prefetch_count, "writebacks": self.writeback_count},
            "step_stalls": list(self.step_stalls),
        }


def check_plan(plan: MemoryPlan, seq: AccessSequence) -> None:
    """Raise :class:`IntegrityError` unless ``plan`` is a consistent plan for ``seq``."""
    if len(plan.residency) != len(seq.steps):
        raise IntegrityError(f"plan covers {len(plan.residency)} steps, sequence has {len(seq.steps)}")
    unknown = [b for b in plan.initial if b not in seq.blocks]
    if unknown:
        raise IntegrityError(f"plan references undeclared block {unknown[0]!r}")
    created = created_blocks(seq)
    loads = {(p.need_step, p.block) for p in plan.prefetches}
    leaves = {(o.issue_step, o.block) for o in plan.offloads}
    for p in plan.prefetches:
        if p.issue_step > p.need_step:
            raise IntegrityError(f"prefetch of {p.block!r} issued after its use at step {p.need_step}")
    for b in plan.initial:
        if seq.blocks[b].size > plan.capacity:
            raise IntegrityError(f"initial block {b!r} exceeds capacity")
    before = plan.initial
    for i, (step, res) in enumerate(zip(seq.steps, plan.residency)):
        size = sum(seq.blocks[b].size for b in res)
        if size > plan.capacity:
            raise IntegrityError(f"step {i}: residency {size} bytes exceeds capacity {plan.capacity}")
        missing = [b for b in step.touched if b not in res]
        if missing:
            raise IntegrityError(f"step {i}: block {missing[0]!r} is used but not resident")
        for b in res - before:
            if (i, b) not in loads and created.get(b) != i:
                raise IntegrityError(f"step {i}: block {b!r} became resident without a prefetch")
        for b in before - res:
            if (i, b) not in leaves:
                raise IntegrityError(f"step {i}: block {b!r} left HBM without an offload")
        before = res


def simulate_plan(plan: MemoryPlan, seq: AccessSequence, topology: Topology, rank: int = 0) -> OffloadReport:
    check_plan(plan, seq)
    bw = topology.pool_bandwidth
    sizes = {b: blk.size for b, blk in seq.blocks.items()}
    by_need: dict[int, list] = {}
    for p in plan.prefetches:
        by_need.setdefault(p.need_step, []).append(p)
    writebacks: dict[int, list] = {}
    for o in plan.offloads:
        if o.writeback:
            writebacks.setdefault(o.issue_step, []).append(o)

    avail = [0.0] * (len(seq.steps) + 1)
    h2d_free = d2h_free = 0.0
    wb_done: dict[str, float] = {}
    stalls: list[float] = []
    trace: list[Interval] = []
    transfer_bytes = 0

    for i, step in enumerate(seq.steps):
        for o in sorted(writebacks.get(i, ()), key=lambda o: o.block):
            start = max(avail[i], d2h_free)
            d2h_free = start + sizes[o.block] / bw
            wb_done[o.block] = d2h_free
            transfer_bytes += sizes[o.block]
            trace.append(Interval(rank, start, d2h_free, "d2h", f"offload:{o.block}", "transfer"))
        arrival = avail[i]
        for p in by_need.get(i, ()):
            start = max(avail[p.issue_step], h2d_free, wb_done.get(p.block, 0.0))
            h2d_free = start + sizes[p.block] / bw
            transfer_bytes += sizes[p.block]
            arrival = max(arrival, h2d_free)
            trace.append(Interval(rank, start, h2d_free, "h2d", f"prefetch:{p.block}", "transfer"))
        stalls.append(arrival - avail[i])
        avail[i + 1] = arrival + step.compute_duration
        trace.append(Interval(rank, arrival, avail[i + 1], "compute", step.label or f"step{i}", "compute"))

    peak = max([sum(sizes[b] for b in plan.initial)] + plan.resident_bytes(seq))
    writeback_count = sum(len(v) for v in writebacks.values())
    return OffloadReport(
        total_stall=sum(stalls),
        step_time_with_offload=avail[-1],
        step_time_without_offload=seq.compute_total,
        hbm_peak=peak,
        hbm_capacity=plan.capacity,
        transfer_count=len(plan.prefetches) + writeback_count,
        transfer_bytes=transfer_bytes,
        prefetch_count=len(plan.prefetches),
        writeback_count=writeback_count,
        step_stalls=tuple(stalls),
        trace=tuple(trace),
    )
