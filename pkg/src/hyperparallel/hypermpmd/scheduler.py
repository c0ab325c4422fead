"""SPMD baseline and MPMD list schedulers.

Both schedulers unroll the workload over its steps (instance ``id@k`` for
step ``k`` when there is more than one step) and place every instance on
per-rank lanes with append-only semantics: an instance starts no earlier than
its predecessors' ends and the end of the last instance on each lane it uses.

SPMD baseline
    Instances run in one global program order (step, then id-ordered
    topological order) with a barrier between steps.  ``overlap="none"``
    puts compute and communication on a single lane per rank.
    ``overlap="in_order"`` models a conventional two-stream runtime: one
    compute and one communication stream per rank, with instances issued in
    program order (an instance never starts before its predecessor in program
    order on any of its ranks).

MPMD
    Per-rank cube/vector/comm lanes (CPU ranks have one ``cpu`` compute lane),
    no step barrier, groups synchronising only through edges, and pooled tasks
    dispatched to the earliest-available ranks of the matching hardware class.
    Dispatch is event-driven: the ready instance that can start earliest goes
    first; ties prefer the longer remaining path, then (ready time, step, id).
    The order-preserving relaxation of the SPMD schedule is also built on the
    same lanes and the shorter of the two is returned, so the MPMD makespan
    never exceeds the baseline's.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from ..errors import ConfigError
from ..topology import Topology
from .groups import ProcessGroupSpec
from .timeline import Interval, ScheduleReport, Timeline, report
from .workload import Task, WorkloadGraph


@dataclass
class _Inst:
    name: str
    task: Task
    step: int
    pos: int
    duration: float
    ranks: tuple[int, ...] | None
    preds: list[int]
    succs: list[int]


def _unroll(workload: WorkloadGraph, groups: dict[str, ProcessGroupSpec], topology: Topology) -> list[_Inst]:
    order = workload.topological_order()
    pos = {tid: i for i, tid in enumerate(order)}
    tasks = workload.task_map
    durations = {tid: workload.task_duration(tasks[tid], topology, groups) for tid in order}
    for g in groups.values():
        for r in g.ranks:
            topology.check_rank(r)
    index: dict[tuple[int, str], int] = {}
    insts: list[_Inst] = []
    for k in range(workload.steps):
        for tid in order:
            task = tasks[tid]
            name = tid if workload.steps == 1 else f"{tid}@{k}"
            ranks = None if task.pooled else tuple(workload.task_ranks(task, groups))
            if ranks is not None:
                for r in ranks:
                    topology.check_rank(r)
            index[(k, tid)] = len(insts)
            insts.append(_Inst(name, task, k, pos[tid], durations[tid], ranks, [], []))
    for k in range(workload.steps):
        for u, v in workload.edges:
            a, b = index[(k, u)], index[(k, v)]
            insts[b].preds.append(a)
            insts[a].succs.append(b)
        if k:
            for tid in order:
                a, b = index[(k - 1, tid)], index[(k, tid)]
                insts[b].preds.append(a)
                insts[a].succs.append(b)
    return insts


def _hardware(groups: dict[str, ProcessGroupSpec]) -> dict[int, str]:
    return {r: g.hardware_class for g in groups.values() for r in g.ranks}


def _all_ranks(insts: list[_Inst], groups: dict[str, ProcessGroupSpec]) -> tuple[int, ...]:
    ranks = set()
    for inst in insts:
        if inst.ranks is not None:
            ranks.update(inst.ranks)
        else:
            ranks.update(groups[inst.task.group].ranks)
    return tuple(sorted(ranks))


def _interval_kind(task: Task) -> str:
    return "communication" if task.kind == "communication" else "compute"


class _Lanes:
    """Free times of every lane on every rank."""

    def __init__(self, counts: dict[str, int]) -> None:
        self.counts = counts
        self.free: dict[tuple[int, str], list[float]] = {}

    def slots(self, rank: int, lane: str) -> list[float]:
        key = (rank, lane)
        if key not in self.free:
            self.free[key] = [0.0] * self.counts.get(lane, 1)
        return self.free[key]

    def earliest(self, rank: int, lane: str) -> tuple[float, int]:
        slots = self.slots(rank, lane)
        idx = min(range(len(slots)), key=lambda i: (slots[i], i))
        return slots[idx], idx

    def label(self, lane: str, idx: int) -> str:
        return lane if self.counts.get(lane, 1) == 1 else f"{lane}{idx}"


def _mpmd_lane(task: Task, rank: int, hardware: dict[int, str]) -> str:
    if task.kind == "communication":
        return "comm"
    return "cpu" if hardware.get(rank) == "CPU" else task.engine


def _validate(workload: WorkloadGraph, groups: dict[str, ProcessGroupSpec]) -> None:
    workload.check_groups(groups)
    for t in workload.tasks:
        if t.pooled and t.width > len(groups[t.group].ranks):
            raise ConfigError(f"task {t.id!r}: width {t.width} exceeds group {t.group!r} size", field="width")


# SPMD ---------------------------------------------------------------------

@dataclass
class _SpmdResult:
    timeline: Timeline
    order: list[int]
    placement: dict[int, tuple[int, ...]]


def _spmd(workload: WorkloadGraph, topology: Topology) -> _SpmdResult:
    groups = workload.groups
    _validate(workload, groups)
    insts = _unroll(workload, groups, topology)
    order = sorted(range(len(insts)), key=lambda i: (insts[i].step, insts[i].pos))
    in_order = workload.overlap == "in_order"
    lane_free: dict[tuple[int, str], float] = {}
    last_issue: dict[int, float] = {}
    end: dict[int, float] = {}
    placement: dict[int, tuple[int, ...]] = {}
    intervals: list[Interval] = []
    barrier = 0.0
    step_end = 0.0
    current_step = 0

    def lane_of(task: Task) -> str:
        if not in_order:
            return "main"
        return "comm" if task.kind == "communication" else "compute"

    for i in order:
        inst = insts[i]
        if inst.step != current_step:
            barrier = max(barrier, step_end)
            current_step = inst.step
        lane = lane_of(inst.task)
        ready = max((end[p] for p in inst.preds), default=0.0)
        if inst.ranks is None:
            pool = groups[inst.task.group].ranks
            ranks = tuple(sorted(sorted(pool, key=lambda r: (lane_free.get((r, lane), 0.0), r))[: inst.task.width]))
        else:
            ranks = inst.ranks
        start = max([ready, barrier] + [lane_free.get((r, lane), 0.0) for r in ranks])
        if in_order:
            start = max([start] + [last_issue.get(r, 0.0) for r in ranks])
        finish = start + inst.duration
        for r in ranks:
            lane_free[(r, lane)] = finish
            last_issue[r] = start
            intervals.append(Interval(r, start, finish, lane, inst.name, _interval_kind(inst.task)))
        end[i] = finish
        placement[i] = ranks
        step_end = max(step_end, finish)

    timeline = Timeline(tuple(sorted(intervals)), _all_ranks(insts, groups),
                        {inst.name: inst.task.group for inst in insts})
    return _SpmdResult(timeline, order, placement)


def schedule_spmd(workload: WorkloadGraph, topology: Topology) -> Timeline:
    return _spmd(workload, topology).timeline


# MPMD ---------------------------------------------------------------------

def _bottom_levels(insts: list[_Inst]) -> list[float]:
    order = sorted(range(len(insts)), key=lambda i: (insts[i].step, insts[i].pos), reverse=True)
    level = [0.0] * len(insts)
    for i in order:
        level[i] = insts[i].duration + max((level[s] for s in insts[i].succs), default=0.0)
    return level


def _place(inst: _Inst, ranks: Iterable[int], start: float, lanes: _Lanes,
           hardware: dict[int, str], intervals: list[Interval]) -> float:
    finish = start + inst.duration
    for r in ranks:
        lane = _mpmd_lane(inst.task, r, hardware)
        _, idx = lanes.earliest(r, lane)
        lanes.slots(r, lane)[idx] = finish
        intervals.append(Interval(r, start, finish, lanes.label(lane, idx), inst.name, _interval_kind(inst.task)))
    return finish


def _dynamic(insts: list[_Inst], groups: dict[str, ProcessGroupSpec], lane_counts: dict[str, int]) -> list[Interval]:
    hardware = _hardware(groups)
    pools: dict[str, list[int]] = {}
    for inst in insts:
        if inst.ranks is None:
            hw = groups[inst.task.group].hardware_class
            pools.setdefault(hw, [])
            for r in groups[inst.task.group].ranks:
                if r not in pools[hw]:
                    pools[hw].append(r)
    for hw in pools:
        pools[hw].sort()

    level = _bottom_levels(insts)
    lanes = _Lanes(lane_counts)
    waiting = [len(inst.preds) for inst in insts]
    ready = {i for i, w in enumerate(waiting) if w == 0}
    end: dict[int, float] = {}
    intervals: list[Interval] = []

    def candidate(i: int) -> tuple[tuple, tuple[int, ...]]:
        inst = insts[i]
        ready_t = max((end[p] for p in inst.preds), default=0.0)
        if inst.ranks is None:
            pool = pools[groups[inst.task.group].hardware_class]
            free = sorted((lanes.earliest(r, _mpmd_lane(inst.task, r, hardware))[0], r) for r in pool)
            chosen = free[: inst.task.width]
            ranks = tuple(sorted(r for _, r in chosen))
            est = max([ready_t] + [t for t, _ in chosen])
        else:
            ranks = inst.ranks
            est = max([ready_t] + [lanes.earliest(r, _mpmd_lane(inst.task, r, hardware))[0] for r in ranks])
        return (est, -level[i], ready_t, inst.step, inst.task.id), ranks

    while ready:
        best_key, best_i, best_ranks = None, -1, ()
        for i in ready:
            key, ranks = candidate(i)
            if best_key is None or key < best_key:
                best_key, best_i, best_ranks = key, i, ranks
        ready.remove(best_i)
        end[best_i] = _place(insts[best_i], best_ranks, best_key[0], lanes, hardware, intervals)
        for s in insts[best_i].succs:
            waiting[s] -= 1
            if waiting[s] == 0:
                ready.add(s)
    return intervals


def _relaxed(insts: list[_Inst], base: _SpmdResult, groups: dict[str, ProcessGroupSpec],
             lane_counts: dict[str, int]) -> list[Interval]:
    hardware = _hardware(groups)
    lanes = _Lanes(lane_counts)
    end: dict[int, float] = {}
    intervals: list[Interval] = []
    for i in base.order:
        inst = insts[i]
        ranks = base.placement[i]
        ready = max((end[p] for p in inst.preds), default=0.0)
        start = max([ready] + [lanes.earliest(r, _mpmd_lane(inst.task, r, hardware))[0] for r in ranks])
        end[i] = _place(inst, ranks, start, lanes, hardware, intervals)
    return intervals


def schedule_mpmd(workload: WorkloadGraph, groups: Iterable[ProcessGroupSpec] | dict[str, ProcessGroupSpec],
                  topology: Topology) -> Timeline:
    group_map = groups if isinstance(groups, dict) else {g.name: g for g in groups}
    _validate(workload, group_map)
    bound = WorkloadGraph(workload.tasks, workload.edges, workload.steps, dict(group_map),
                          workload.overlap, dict(workload.lanes))
    insts = _unroll(bound, group_map, topology)
    ranks = _all_ranks(insts, group_map)
    owners = {inst.name: inst.task.group for inst in insts}

    dynamic = Timeline(tuple(sorted(_dynamic(insts, group_map, bound.lanes))), ranks, owners)
    relaxed = Timeline(tuple(sorted(_relaxed(insts, _spmd(bound, topology), group_map, bound.lanes))),
                       ranks, owners)
    return relaxed if relaxed.makespan < dynamic.makespan else dynamic


@dataclass(frozen=True)
class ComparisonReport:
    spmd: ScheduleReport
    mpmd: ScheduleReport

    @property
    def makespan_ratio(self) -> float:
        if self.spmd.makespan == 0:
            return 1.0
        return self.mpmd.makespan / self.spmd.makespan

    def to_dict(self) -> dict:
        return {"spmd": self.spmd.to_dict(), "mpmd": self.mpmd.to_dict(), "makespan_ratio": self.makespan_ratio}


def compare_schedules(workload: WorkloadGraph, groups: Iterable[ProcessGroupSpec] | None,
                      topology: Topology) -> tuple[ComparisonReport, Timeline, Timeline]:
    if groups is not None:
        workload = workload.with_groups(groups)
    spmd = schedule_spmd(workload, topology)
    mpmd = schedule_mpmd(workload, workload.groups, topology)
    return ComparisonReport(report(spmd, "spmd"), report(mpmd, "mpmd")), spmd, mpmd
