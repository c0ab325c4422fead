"""Timelines and the metrics derived from them."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Iterable

INTERVAL_KINDS = ("compute", "communication", "transfer", "idle")


@dataclass(frozen=True, order=True)
class Interval:
    rank: int
    start: float
    end: float
    lane: str
    task: str
    kind: str

    @property
    def duration(self) -> float:
        return self.end - self.start

    def record(self) -> dict[str, Any]:
        return {"rank": self.rank, "lane": self.lane, "task": self.task, "kind": self.kind,
                "start": self.start, "end": self.end}


@dataclass(frozen=True)
class Timeline:
    """Busy intervals per rank; idle time is derived, see :meth:`idle_intervals`.

    ``task_groups`` maps each scheduled task instance to the group (model
    instance) that owns it, which is what straggler metrics are computed over.
    """

    intervals: tuple[Interval, ...]
    ranks: tuple[int, ...]
    task_groups: dict[str, str] = field(default_factory=dict)

    @property
    def makespan(self) -> float:
        return max((iv.end for iv in self.intervals), default=0.0)

    @property
    def first_start(self) -> float:
        return min((iv.start for iv in self.intervals), default=0.0)

    def on_rank(self, rank: int) -> list[Interval]:
        return sorted((iv for iv in self.intervals if iv.rank == rank), key=lambda iv: (iv.start, iv.lane))

    def task_span(self, task: str) -> tuple[float, float]:
        ivs = [iv for iv in self.intervals if iv.task == task]
        return min(iv.start for iv in ivs), max(iv.end for iv in ivs)

    def idle_intervals(self, rank: int) -> list[Interval]:
        gaps = []
        cursor = self.first_start
        for a, b in _union(iv for iv in self.intervals if iv.rank == rank):
            if a > cursor:
                gaps.append(Interval(rank, cursor, a, "-", "idle", "idle"))
            cursor = max(cursor, b)
        if cursor < self.makespan:
            gaps.append(Interval(rank, cursor, self.makespan, "-", "idle", "idle"))
        return gaps

    def records(self) -> list[dict[str, Any]]:
        return [iv.record() for iv in sorted(self.intervals, key=lambda iv: (iv.start, iv.rank, iv.lane, iv.task))]


def _union(intervals: Iterable[Interval]) -> list[tuple[float, float]]:
    spans = sorted((iv.start, iv.end) for iv in intervals if iv.end > iv.start)
    merged: list[list[float]] = []
    for a, b in spans:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def _overlap_with(span: tuple[float, float], union: list[tuple[float, float]]) -> float:
    a, b = span
    total = 0.0
    for c, d in union:
        if d <= a:
            continue
        if c >= b:
            break
        total += min(b, d) - max(a, c)
    return total


def masking_ratio(timeline: Timeline) -> float:
    """Share of communication time overlapped by compute on the same rank (1.0 if there is none)."""
    comm_total = 0.0
    hidden = 0.0
    for rank in timeline.ranks:
        ivs = [iv for iv in timeline.intervals if iv.rank == rank]
        compute = _union(iv for iv in ivs if iv.kind == "compute")
        for iv in ivs:
            if iv.kind == "communication":
                comm_total += iv.duration
                hidden += _overlap_with((iv.start, iv.end), compute)
    if comm_total == 0.0:
        return 1.0
    return min(1.0, hidden / comm_total)


def busy_time(timeline: Timeline, rank: int) -> float:
    return sum(b - a for a, b in _union(iv for iv in timeline.intervals if iv.rank == rank))


def bubble_fraction(timeline: Timeline) -> float:
    """Idle rank-time inside ``[first start, makespan]`` over ``ranks x span``."""
    span = timeline.makespan - timeline.first_start
    if span <= 0 or not timeline.ranks:
        return 0.0
    idle = sum(span - busy_time(timeline, r) for r in timeline.ranks)
    return min(1.0, max(0.0, idle / (len(timeline.ranks) * span)))


def utilization(timeline: Timeline) -> dict[int, float]:
    mk = timeline.makespan
    if mk <= 0:
        return {r: 0.0 for r in timeline.ranks}
    return {r: min(1.0, busy_time(timeline, r) / mk) for r in timeline.ranks}


def communication_share(timeline: Timeline) -> float:
    comm = sum(iv.duration for iv in timeline.intervals if iv.kind == "communication")
    comp = sum(iv.duration for iv in timeline.intervals if iv.kind == "compute")
    return comm / (comm + comp) if comm + comp > 0 else 0.0


def group_finish_times(timeline: Timeline) -> dict[str, float]:
    finish: dict[str, float] = {}
    for iv in timeline.intervals:
        group = timeline.task_groups.get(iv.task)
        if group is not None:
            finish[group] = max(finish.get(group, 0.0), iv.end)
    return finish


def straggler_gap(timeline: Timeline) -> float:
    finish = group_finish_times(timeline)
    if len(finish) < 2:
        return 0.0
    return max(finish.values()) - min(finish.values())


@dataclass(frozen=True)
class ScheduleReport:
    scheduler: str
    makespan: float
    masking_ratio: float
    bubble_fraction: float
    communication_share: float
    straggler_gap: float
    per_rank_utilization: dict[int, float]
    group_finish: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["per_rank_utilization"] = {str(k): v for k, v in sorted(self.per_rank_utilization.items())}
        d["group_finish"] = dict(sorted(self.group_finish.items()))
        return d


def report(timeline: Timeline, scheduler: str) -> ScheduleReport:
    return ScheduleReport(
        scheduler=scheduler,
        makespan=timeline.makespan,
        masking_ratio=masking_ratio(timeline),
        bubble_fraction=bubble_fraction(timeline),
        communication_share=communication_share(timeline),
        straggler_gap=straggler_gap(timeline),
        per_rank_utilization=utilization(timeline),
        group_finish=group_finish_times(timeline),
    )
