"""Reference sharded executor.

Holds real element values per device-matrix coordinate so that sharding,
gathering and plan execution can be checked element by element.  It exists
for verification, not speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, IntegrityError
from .layout import Coord, Layout, ShardStrategy


@dataclass(frozen=True)
class Shard:
    offset: tuple[int, ...]
    values: np.ndarray

    @property
    def local_shape(self) -> tuple[int, ...]:
        return tuple(self.values.shape)


@dataclass(frozen=True)
class ShardedTensor:
    global_shape: tuple[int, ...]
    layout: Layout
    placement: dict[Coord, Shard]

    def ownership(self) -> dict[Coord, tuple[tuple[int, ...], tuple[int, ...]]]:
        return {c: (s.offset, s.local_shape) for c, s in self.placement.items()}


def _block_slices(offset, shape) -> tuple[slice, ...]:
    return tuple(slice(o, o + n) for o, n in zip(offset, shape))


def shard_tensor(dense, strategy: ShardStrategy, layout: Layout) -> ShardedTensor:
    arr = np.asarray(dense)
    if tuple(arr.shape) != strategy.tensor_shape:
        raise ConfigError(f"tensor shape {tuple(arr.shape)} does not match strategy shape {strategy.tensor_shape}",
                          field="shape")
    if any(a is not None and a >= len(layout.dims) for a in strategy.dim_assignment):
        raise ConfigError("strategy refers to an axis the layout does not have", field="tensor_map")
    placement = {}
    for coord in layout.coordinates():
        offset, local = strategy.owned_block(layout, coord)
        placement[coord] = Shard(offset, arr[_block_slices(offset, local)].copy())
    return ShardedTensor(strategy.tensor_shape, layout, placement)


def gather_tensor(sharded: ShardedTensor) -> np.ndarray:
    """Reassemble the global tensor, checking that replicas agree and every element is covered."""
    shards = list(sharded.placement.values())
    if not shards:
        raise IntegrityError("sharded tensor has no placements")
    dtype = shards[0].values.dtype
    out = np.zeros(sharded.global_shape, dtype=dtype)
    filled = np.zeros(sharded.global_shape, dtype=bool)
    for coord in sorted(sharded.placement):
        shard = sharded.placement[coord]
        region = _block_slices(shard.offset, shard.local_shape)
        if any(s.stop > n for s, n in zip(region, sharded.global_shape)):
            raise IntegrityError(f"shard at {coord} extends past the global shape")
        seen = filled[region]
        if np.any(seen) and not np.array_equal(out[region][seen], shard.values[seen]):
            raise IntegrityError(f"replica disagreement at coordinate {coord}")
        out[region] = shard.values
        filled[region] = True
    if not filled.all():
        raise IntegrityError(f"{int((~filled).sum())} elements are not held by any coordinate")
    return out


# plan execution -----------------------------------------------------------

def _all_gather(st: ShardedTensor, axis: int, dim: int) -> ShardedTensor:
    placement = dict(st.placement)
    for group in st.layout.axis_groups(axis):
        parts = [st.placement[c] for c in group]
        values = np.concatenate([p.values for p in parts], axis=dim)
        offset = list(parts[0].offset)
        offset[dim] = min(p.offset[dim] for p in parts)
        for c in group:
            placement[c] = Shard(tuple(offset), values)
    return ShardedTensor(st.global_shape, st.layout, placement)


def _slice(st: ShardedTensor, axis: int, dim: int) -> ShardedTensor:
    n = st.layout.dims[axis]
    placement = {}
    for c, shard in st.placement.items():
        size = shard.local_shape[dim]
        if size % n:
            raise IntegrityError(f"cannot slice dim {dim} of local size {size} into {n} blocks")
        block = size // n
        offset = list(shard.offset)
        offset[dim] += c[axis] * block
        index = [slice(None)] * len(offset)
        index[dim] = slice(c[axis] * block, (c[axis] + 1) * block)
        placement[c] = Shard(tuple(offset), shard.values[tuple(index)].copy())
    return ShardedTensor(st.global_shape, st.layout, placement)


def _all_to_all(st: ShardedTensor, axis: int, src_dim: int, dst_dim: int) -> ShardedTensor:
    """Move the sharding of ``axis`` from ``src_dim`` to ``dst_dim``.

    Sender ``k`` splits its block along ``dst_dim`` into ``n`` chunks and sends
    chunk ``j`` to member ``j``; each receiver concatenates what it got along
    ``src_dim`` in sender order.
    """
    n = st.layout.dims[axis]
    placement = dict(st.placement)
    for group in st.layout.axis_groups(axis):
        chunks = [np.split(st.placement[c].values, n, axis=dst_dim) for c in group]
        base = st.placement[group[0]].offset
        for j, receiver in enumerate(group):
            values = np.concatenate([chunks[k][j] for k in range(n)], axis=src_dim)
            offset = list(base)
            offset[src_dim] = min(st.placement[c].offset[src_dim] for c in group)
            offset[dst_dim] = st.placement[receiver].offset[dst_dim] + j * (values.shape[dst_dim])
            placement[receiver] = Shard(tuple(offset), values)
    return ShardedTensor(st.global_shape, st.layout, placement)


def execute_plan(sharded: ShardedTensor, plan) -> ShardedTensor:
    """Run a :class:`~hyperparallel.hypershard.reshard.CollectivePlan` on real data."""
    current = sharded
    for step in plan.steps:
        if step.op == "all_gather":
            current = _all_gather(current, step.axis, step.src_dim)
        elif step.op == "slice":
            current = _slice(current, step.axis, step.dst_dim)
        elif step.op == "all_to_all":
            current = _all_to_all(current, step.axis, step.src_dim, step.dst_dim)
        else:
            raise IntegrityError(f"unknown plan op {step.op!r}")
    return current


def same_placement(a: ShardedTensor, b: ShardedTensor) -> bool:
    if a.global_shape != b.global_shape or set(a.placement) != set(b.placement):
        return False
    for c, sa in a.placement.items():
        sb = b.placement[c]
        if sa.offset != sb.offset or not np.array_equal(sa.values, sb.values):
            return False
    return True
