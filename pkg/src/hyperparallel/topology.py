"""Supernode topology: two full-mesh tiers plus a pooled DRAM tier.

Ranks are numbered row-major over ``(rack, device-in-rack)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from typing import Any, Mapping

from . import configio
from .errors import ConfigError


class LinkClass(str, enum.Enum):
    SELF = "self"
    INTRA_RACK = "intra_rack"
    INTER_RACK = "inter_rack"


_TIER_ORDER = {LinkClass.SELF: 0, LinkClass.INTRA_RACK: 1, LinkClass.INTER_RACK: 2}

_INT_FIELDS = ("rack_count", "devices_per_rack")
_BYTE_FIELDS = ("hbm_capacity_per_device", "pool_capacity")
_TIME_FIELDS = ("intra_rack_latency", "inter_rack_latency")
_RATE_FIELDS = ("intra_rack_bandwidth", "inter_rack_bandwidth", "hbm_bandwidth", "pool_bandwidth")


@dataclass(frozen=True)
class Topology:
    rack_count: int
    devices_per_rack: int
    intra_rack_bandwidth: float
    inter_rack_bandwidth: float
    intra_rack_latency: float
    inter_rack_latency: float
    hbm_capacity_per_device: int
    hbm_bandwidth: float
    pool_capacity: int
    pool_bandwidth: float

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "pool_capacity":
                # a machine without a memory pool is legal; everything else must be positive
                if value < 0:
                    raise ConfigError(f"{f.name} must be >= 0, got {value}", field=f.name)
            elif not value > 0 or (isinstance(value, float) and math.isinf(value)):
                raise ConfigError(f"{f.name} must be a positive finite number, got {value}", field=f.name)
        if self.intra_rack_latency > self.inter_rack_latency:
            raise ConfigError(
                "tier ordering violated: intra_rack_latency "
                f"({self.intra_rack_latency:g}s) exceeds inter_rack_latency ({self.inter_rack_latency:g}s)",
                field="intra_rack_latency")
        if self.intra_rack_bandwidth < self.inter_rack_bandwidth:
            raise ConfigError(
                "tier ordering violated: inter_rack_bandwidth "
                f"({self.inter_rack_bandwidth:g}) exceeds intra_rack_bandwidth ({self.intra_rack_bandwidth:g})",
                field="inter_rack_bandwidth")

    @property
    def device_count(self) -> int:
        return self.rack_count * self.devices_per_rack

    @property
    def ranks(self) -> range:
        return range(self.device_count)

    def rack_of(self, rank: int) -> int:
        self.check_rank(rank)
        return rank // self.devices_per_rack

    def check_rank(self, rank: int) -> None:
        if isinstance(rank, bool) or not isinstance(rank, int) or not 0 <= rank < self.device_count:
            raise ConfigError(f"rank {rank!r} out of range [0, {self.device_count})", field="rank")

    def tier_params(self, link: LinkClass) -> tuple[float, float]:
        """``(latency, bandwidth)`` for a link tier."""
        if link is LinkClass.INTRA_RACK:
            return self.intra_rack_latency, self.intra_rack_bandwidth
        if link is LinkClass.INTER_RACK:
            return self.inter_rack_latency, self.inter_rack_bandwidth
        return 0.0, math.inf

    def pool_share(self, participating: int | None = None) -> float:
        """Pool bytes available to one device when ``participating`` devices split the pool evenly."""
        n = self.device_count if participating is None else participating
        if n <= 0:
            raise ConfigError(f"participating device count must be positive, got {n}", field="participating_devices")
        return self.pool_capacity / n

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def build_topology(config: Mapping[str, Any]) -> Topology:
    """Validate a cluster configuration mapping and build a :class:`Topology`.

    Times accept decimal seconds or ``ns``/``us``/``ms`` suffixes; byte
    quantities must be integers.
    """
    doc = configio.require_mapping(config, "cluster")
    if "cluster" in doc and isinstance(doc["cluster"], dict) and "rack_count" not in doc:
        doc = doc["cluster"]
    values: dict[str, Any] = {}
    for name in _INT_FIELDS + _BYTE_FIELDS + _TIME_FIELDS + _RATE_FIELDS:
        raw = configio.get(doc, name, "cluster")
        if name in _INT_FIELDS or name in _BYTE_FIELDS:
            value = configio.parse_bytes(raw, name, doc)
        elif name in _TIME_FIELDS:
            value = configio.parse_seconds(raw, name, doc)
        else:
            value = configio.parse_number(raw, name, doc)
        values[name] = value
    try:
        return Topology(**values)
    except ConfigError as exc:
        raise configio.fail(exc.message, doc, exc.field) from None


def link_between(topology: Topology, a: int, b: int) -> LinkClass:
    ra, rb = topology.rack_of(a), topology.rack_of(b)
    if a == b:
        return LinkClass.SELF
    return LinkClass.INTRA_RACK if ra == rb else LinkClass.INTER_RACK


def worst_link(topology: Topology, ranks: list[int] | tuple[int, ...]) -> LinkClass:
    """Slowest tier present among all pairs of ``ranks``."""
    for r in ranks:
        topology.check_rank(r)
    if len(set(ranks)) <= 1:
        return LinkClass.SELF
    racks = {topology.rack_of(r) for r in ranks}
    return LinkClass.INTER_RACK if len(racks) > 1 else LinkClass.INTRA_RACK


def point_to_point_time(topology: Topology, nbytes: float, a: int, b: int) -> float:
    if nbytes < 0:
        raise ConfigError(f"byte count must be non-negative, got {nbytes}", field="bytes")
    link = link_between(topology, a, b)
    if link is LinkClass.SELF:
        return 0.0
    latency, bandwidth = topology.tier_params(link)
    return latency + nbytes / bandwidth


def tier_rank(link: LinkClass) -> int:
    return _TIER_ORDER[link]
