"""Declarative layouts: a device matrix with named axes, and per-tensor maps onto it."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

from ..errors import ConfigError

# Replication marker inside a tensor map.  Files spell it as the string "None".
NONE = None

Coord = tuple[int, ...]


@dataclass(frozen=True)
class DeviceMatrix:
    dims: tuple[int, ...]
    aliases: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(self.dims))
        object.__setattr__(self, "aliases", tuple(self.aliases))
        if not self.dims:
            raise ConfigError("device_matrix must have at least one axis", field="device_matrix")
        if len(self.dims) != len(self.aliases):
            raise ConfigError(
                f"alias_name has {len(self.aliases)} entries but device_matrix has {len(self.dims)} axes",
                field="alias_name")
        for i, d in enumerate(self.dims):
            if isinstance(d, bool) or not isinstance(d, int) or d <= 0:
                raise ConfigError(f"device_matrix[{i}] must be a positive integer, got {d!r}",
                                  field="device_matrix")
        for name in self.aliases:
            if not isinstance(name, str) or not name or name == "None":
                raise ConfigError(f"alias names must be non-empty strings other than 'None', got {name!r}",
                                  field="alias_name")
        dupes = sorted({a for a in self.aliases if self.aliases.count(a) > 1})
        if dupes:
            raise ConfigError(f"duplicate alias in alias_name: {', '.join(dupes)}", field="alias_name")

    @property
    def size(self) -> int:
        return math.prod(self.dims)


class Layout:
    """A validated device matrix.  Calling it with a tensor map derives a strategy.

    >>> layout = Layout((2, 2), ("x", "y"))
    >>> layout(("x", "y"), (2, 2)).shard_counts
    (2, 2)
    """

    def __init__(self, device_matrix: Sequence[int] | DeviceMatrix,
                 alias_name: Sequence[str] | None = None, *, device_count: int | None = None) -> None:
        if isinstance(device_matrix, DeviceMatrix):
            self.matrix = device_matrix
        else:
            if alias_name is None:
                raise ConfigError("alias_name is required", field="alias_name")
            self.matrix = DeviceMatrix(tuple(device_matrix), tuple(alias_name))
        if device_count is not None and self.matrix.size > device_count:
            raise ConfigError(
                f"device_matrix needs {self.matrix.size} devices but the topology has {device_count}",
                field="device_matrix")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.matrix.dims

    @property
    def aliases(self) -> tuple[str, ...]:
        return self.matrix.aliases

    @property
    def size(self) -> int:
        return self.matrix.size

    def axis_of(self, alias: str) -> int:
        try:
            return self.aliases.index(alias)
        except ValueError:
            raise ConfigError(f"unknown alias {alias!r} (layout axes: {', '.join(self.aliases)})",
                              field="tensor_map") from None

    def coordinates(self) -> Iterator[Coord]:
        """All device-matrix coordinates in row-major order."""
        return itertools.product(*(range(d) for d in self.dims))

    def linear_index(self, coord: Coord) -> int:
        idx = 0
        for c, d in zip(coord, self.dims):
            idx = idx * d + c
        return idx

    def axis_groups(self, axis: int) -> list[list[Coord]]:
        """Coordinates partitioned into groups that differ only along ``axis``.

        Each group is ordered by its coordinate along ``axis``.
        """
        others = [range(d) for i, d in enumerate(self.dims) if i != axis]
        groups = []
        for rest in itertools.product(*others):
            group = []
            for k in range(self.dims[axis]):
                coord = list(rest)
                coord.insert(axis, k)
                group.append(tuple(coord))
            groups.append(group)
        return groups

    def __call__(self, tensor_map: Sequence[str | None], tensor_shape: Sequence[int]) -> "ShardStrategy":
        return derive_strategy(self, tensor_map, tensor_shape)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Layout) and self.matrix == other.matrix

    def __hash__(self) -> int:
        return hash(self.matrix)

    def __repr__(self) -> str:
        return f"Layout(device_matrix={self.dims}, alias_name={self.aliases})"


@dataclass(frozen=True)
class ShardStrategy:
    """Symbolic partitioning of one tensor; carries shapes only, never element data."""

    tensor_shape: tuple[int, ...]
    dim_assignment: tuple[int | None, ...]
    shard_counts: tuple[int, ...]

    @property
    def local_shape(self) -> tuple[int, ...]:
        return tuple(s // c for s, c in zip(self.tensor_shape, self.shard_counts))

    def axis_to_dim(self) -> dict[int, int]:
        return {axis: dim for dim, axis in enumerate(self.dim_assignment) if axis is not None}

    def tensor_map(self, layout: Layout) -> tuple[str | None, ...]:
        return tuple(None if a is None else layout.aliases[a] for a in self.dim_assignment)

    def owned_block(self, layout: Layout, coord: Coord) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """``(offset, local_shape)`` of the block held at ``coord``."""
        local = self.local_shape
        offset = tuple(0 if axis is None else coord[axis] * local[dim]
                       for dim, axis in enumerate(self.dim_assignment))
        return offset, local


def make_layout(device_matrix: DeviceMatrix) -> Layout:
    return Layout(device_matrix)


def normalize_tensor_map(tensor_map: Sequence[str | None]) -> tuple[str | None, ...]:
    return tuple(None if entry in (None, "None") else entry for entry in tensor_map)


def derive_strategy(layout: Layout, tensor_map: Sequence[str | None],
                    tensor_shape: Sequence[int]) -> ShardStrategy:
    entries = normalize_tensor_map(tensor_map)
    shape = tuple(tensor_shape)
    if len(entries) != len(shape):
        raise ConfigError(f"tensor_map has {len(entries)} entries but the tensor has rank {len(shape)}",
                          field="tensor_map")
    for i, s in enumerate(shape):
        if isinstance(s, bool) or not isinstance(s, int) or s <= 0:
            raise ConfigError(f"tensor dimension {i} must be a positive integer, got {s!r}", field="shape")
    assignment: list[int | None] = []
    counts: list[int] = []
    seen: dict[str, int] = {}
    for dim, alias in enumerate(entries):
        if alias is None:
            assignment.append(None)
            counts.append(1)
            continue
        if not isinstance(alias, str):
            raise ConfigError(f"tensor_map[{dim}] must be an alias name or 'None', got {alias!r}",
                              field="tensor_map")
        axis = layout.axis_of(alias)
        if alias in seen:
            raise ConfigError(f"alias {alias!r} reused: it already shards dimension {seen[alias]}",
                              field="tensor_map")
        seen[alias] = dim
        divisor = layout.dims[axis]
        if shape[dim] % divisor:
            raise ConfigError(
                f"dimension {dim} of size {shape[dim]} is not divisible by {divisor} (axis {alias!r})",
                field="tensor_map")
        assignment.append(axis)
        counts.append(divisor)
    return ShardStrategy(shape, tuple(assignment), tuple(counts))
