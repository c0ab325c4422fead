"""Closed-form alpha-beta timing of collectives over a device group.

All algorithms run over the slowest link tier present in the group (the
"worst-tier rule").  With ``n`` ranks, per-hop latency ``a`` and bandwidth
``B``, and ``m`` = ``bytes_per_rank``:

=================  ===========================================  ==========================
kind               time                                         meaning of ``m``
=================  ===========================================  ==========================
all_gather         (n-1) * (a + m/B)                            each rank's contribution
reduce_scatter     (n-1) * (a + (m/n)/B)                        each rank's full input
all_reduce         2(n-1) * (a + (m/n)/B)                       each rank's full buffer
all_to_all         (n-1) * (a + (m/n)/B)                        each rank's send buffer
broadcast          ceil(log2 n) * (a + m/B)                     the broadcast payload
point_to_point     a + m/B  (group of exactly two ranks)        the message
=================  ===========================================  ==========================

So ``all_reduce(m) == reduce_scatter(m) + all_gather(m / n)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Sequence

from .errors import ConfigError
from .topology import LinkClass, Topology, worst_link


class CollectiveKind(str, enum.Enum):
    ALL_REDUCE = "all_reduce"
    ALL_GATHER = "all_gather"
    REDUCE_SCATTER = "reduce_scatter"
    ALL_TO_ALL = "all_to_all"
    BROADCAST = "broadcast"
    POINT_TO_POINT = "point_to_point"

    @classmethod
    def parse(cls, value: Any) -> "CollectiveKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            known = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown collective kind {value!r} (expected one of: {known})",
                              field="kind") from None


@dataclass(frozen=True)
class CollectiveCall:
    kind: CollectiveKind
    bytes_per_rank: float
    group: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", CollectiveKind.parse(self.kind))
        object.__setattr__(self, "group", tuple(self.group))
        if not self.group:
            raise ConfigError("collective group must not be empty", field="group")
        if len(set(self.group)) != len(self.group):
            raise ConfigError(f"collective group has duplicate ranks: {list(self.group)}", field="group")
        if self.bytes_per_rank < 0:
            raise ConfigError(f"bytes_per_rank must be non-negative, got {self.bytes_per_rank}",
                              field="bytes_per_rank")
        if self.kind is CollectiveKind.POINT_TO_POINT and len(self.group) > 2:
            raise ConfigError("point_to_point takes a group of at most two ranks", field="group")


def collective_time(call: CollectiveCall, topology: Topology) -> float:
    n = len(call.group)
    link = worst_link(topology, call.group)
    if n == 1 or link is LinkClass.SELF:
        return 0.0
    alpha, bw = topology.tier_params(link)
    m = float(call.bytes_per_rank)
    kind = call.kind
    if kind is CollectiveKind.ALL_GATHER:
        return (n - 1) * (alpha + m / bw)
    if kind is CollectiveKind.REDUCE_SCATTER or kind is CollectiveKind.ALL_TO_ALL:
        return (n - 1) * (alpha + (m / n) / bw)
    if kind is CollectiveKind.ALL_REDUCE:
        return 2 * (n - 1) * (alpha + (m / n) / bw)
    if kind is CollectiveKind.BROADCAST:
        return math.ceil(math.log2(n)) * (alpha + m / bw)
    return alpha + m / bw


def group_time(kind: CollectiveKind | str, bytes_per_rank: float, group: Sequence[int],
               topology: Topology) -> float:
    return collective_time(CollectiveCall(CollectiveKind.parse(kind), bytes_per_rank, tuple(group)), topology)
