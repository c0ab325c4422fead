"""Independent reference implementations used as test oracles.

None of these import the code under test for the quantity they check; they
are deliberately naive (enumeration, direct slicing, dynamic programming over
every choice) so that agreement is meaningful.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterator

import numpy as np

# --- sharding -----------------------------------------------------------------


def expected_block(dense: np.ndarray, dims: tuple[int, ...], aliases: tuple[str, ...],
                   tensor_map: tuple, coord: tuple[int, ...]) -> np.ndarray:
    """The block a device at ``coord`` must hold, by direct slicing of the dense tensor."""
    index = []
    for dim, alias in enumerate(tensor_map):
        if alias is None or alias == "None":
            index.append(slice(None))
            continue
        axis = aliases.index(alias)
        size = dense.shape[dim] // dims[axis]
        index.append(slice(coord[axis] * size, (coord[axis] + 1) * size))
    return dense[tuple(index)]


def all_tensor_maps(rank: int, aliases: tuple[str, ...]) -> Iterator[tuple]:
    """Every tensor map of length ``rank`` that uses each alias at most once."""
    for choice in itertools.product((None,) + aliases, repeat=rank):
        used = [a for a in choice if a is not None]
        if len(used) == len(set(used)):
            yield choice


# --- collectives ----------------------------------------------------------------


def ring_time(kind: str, m: float, n: int, alpha: float, bw: float) -> float:
    """Textbook ring / tree alpha-beta costs, written out from first principles."""
    if n <= 1:
        return 0.0
    if kind == "all_gather":          # n-1 rounds, each forwards one peer's full contribution
        return (n - 1) * alpha + (n - 1) * m / bw
    if kind == "reduce_scatter":      # n-1 rounds of one 1/n chunk
        return (n - 1) * alpha + (n - 1) * (m / n) / bw
    if kind == "all_reduce":          # reduce-scatter followed by all-gather of chunks
        return 2 * (n - 1) * alpha + 2 * (n - 1) * (m / n) / bw
    if kind == "all_to_all":          # n-1 exchanges of a 1/n slice
        return (n - 1) * alpha + (n - 1) * (m / n) / bw
    if kind == "broadcast":           # binomial tree
        return math.ceil(math.log2(n)) * (alpha + m / bw)
    if kind == "point_to_point":
        return alpha + m / bw
    raise ValueError(kind)


# --- scheduling -----------------------------------------------------------------


def _topological_orders(n: int, preds: list[set[int]]) -> Iterator[list[int]]:
    order: list[int] = []
    placed = [False] * n

    def rec():
        if len(order) == n:
            yield list(order)
            return
        for i in range(n):
            if not placed[i] and all(placed[p] for p in preds[i]):
                placed[i] = True
                order.append(i)
                yield from rec()
                order.pop()
                placed[i] = False

    yield from rec()


def brute_force_makespan(workload, topology) -> float:
    """Optimal makespan over all semi-active schedules of the MPMD resource model.

    Resource model, restated independently: each rank has one lane per engine
    (``cube``, ``vector``, ``comm``); a CPU rank runs all compute on one ``cpu``
    lane.  A task occupies its lane on every rank it runs on for its whole
    duration.  A pooled compute task runs on any ``width`` ranks drawn from the
    union of ranks of groups with the same hardware class that own pooled
    tasks.  Every semi-active schedule is produced by placing tasks in order of
    start time at their earliest feasible start, so enumerating every
    topological order and every pooled rank choice finds the optimum.
    """
    groups = workload.groups
    hardware = {r: g.hardware_class for g in groups.values() for r in g.ranks}
    pooled_classes = {groups[t.group].hardware_class for t in workload.tasks if t.pooled}
    pools = {hc: sorted(r for g in groups.values() if g.hardware_class == hc
                        and any(t.pooled and t.group == g.name for t in workload.tasks) for r in g.ranks)
             for hc in pooled_classes}

    insts = []  # (task, step)
    for k in range(workload.steps):
        for t in workload.tasks:
            insts.append((t, k))
    index = {(t.id, k): i for i, (t, k) in enumerate(insts)}
    preds: list[set[int]] = [set() for _ in insts]
    for k in range(workload.steps):
        for u, v in workload.edges:
            preds[index[(v, k)]].add(index[(u, k)])
        if k:
            for t in workload.tasks:
                preds[index[(t.id, k)]].add(index[(t.id, k - 1)])

    durations = [workload.task_duration(t, topology) for t, _ in insts]

    def lane(task, rank):
        if task.kind == "communication":
            return "comm"
        return "cpu" if hardware[rank] == "CPU" else task.engine

    choices = []
    for t, _ in insts:
        if t.pooled:
            pool = pools[groups[t.group].hardware_class]
            choices.append(list(itertools.combinations(pool, t.width)))
        else:
            ranks = t.collective.ranks if (t.collective is not None and t.collective.ranks) else groups[t.group].ranks
            choices.append([tuple(ranks)])

    best = math.inf
    for order in _topological_orders(len(insts), preds):
        for placement in itertools.product(*choices):
            free: dict = {}
            end = [0.0] * len(insts)
            for i in order:
                t = insts[i][0]
                ranks = placement[i]
                start = max([0.0] + [end[p] for p in preds[i]] + [free.get((r, lane(t, r)), 0.0) for r in ranks])
                end[i] = start + durations[i]
                for r in ranks:
                    free[(r, lane(t, r))] = end[i]
            best = min(best, max(end, default=0.0))
    return 0.0 if best is math.inf else best


# --- caching ----------------------------------------------------------------------


def restricted_growth_strings(max_len: int, max_symbols: int) -> Iterator[tuple[int, ...]]:
    """All sequences up to relabeling: symbol k first appears after symbols 0..k-1."""
    def rec(prefix, m):
        if prefix:
            yield tuple(prefix)
        if len(prefix) == max_len:
            return
        for s in range(min(m + 1, max_symbols)):
            prefix.append(s)
            yield from rec(prefix, max(m, s + 1))
            prefix.pop()

    yield from rec([], 0)


def min_loads(sequence, capacity: int, initial) -> int:
    """Fewest loads over every eviction policy (uniform sizes, read-only accesses), by DP over cache states."""
    states = {frozenset(initial): 0}
    for b in sequence:
        nxt: dict = {}
        for state, cost in states.items():
            if b in state:
                options = [(state, cost)]
            elif len(state) < capacity:
                options = [(state | {b}, cost + 1)]
            else:
                options = [((state - {v}) | {b}, cost + 1) for v in state]
            for s, c in options:
                if c < nxt.get(s, math.inf):
                    nxt[s] = c
        states = nxt
    return min(states.values())


def optimal_loads_all_prefixes(max_len: int, max_symbols: int, max_capacity: int) -> Iterator[tuple]:
    """Yield ``(sequence, capacity, optimum)`` for every restricted-growth sequence.

    The cache starts holding symbols ``0..capacity-1`` (first-use order).  The
    DP state sets are carried down the prefix tree, so each sequence costs one
    DP step.
    """
    def step(states, b, capacity):
        nxt: dict = {}
        for state, cost in states.items():
            if state >> b & 1:
                options = ((state, cost),)
            elif bin(state).count("1") < capacity:
                options = ((state | 1 << b, cost + 1),)
            else:
                options = tuple(((state & ~(1 << v)) | 1 << b, cost + 1)
                                for v in range(max_symbols) if state >> v & 1)
            for s, c in options:
                if c < nxt.get(s, math.inf):
                    nxt[s] = c
        return nxt

    caps = range(1, max_capacity + 1)

    def rec(prefix, m, tables):
        if prefix:
            for c in caps:
                if c < m:
                    yield tuple(prefix), c, min(tables[c].values())
        if len(prefix) == max_len:
            return
        for s in range(min(m + 1, max_symbols)):
            prefix.append(s)
            yield from rec(prefix, max(m, s + 1), {c: step(tables[c], s, c) for c in caps})
            prefix.pop()

    yield from rec([], 0, {c: {(1 << c) - 1: 0} for c in caps})
