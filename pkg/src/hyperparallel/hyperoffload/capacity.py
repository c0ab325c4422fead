"""Capacity arithmetic, sequence-length search, and data-parallel feasibility."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping

from ..costmodel import CollectiveKind, group_time
from ..errors import ConfigError, InfeasibleError
from ..topology import Topology
from .model import MODES, ModelSpec, build_access_sequence
from .planner import plan_offload
from .simulate import simulate_plan


@dataclass(frozen=True)
class CapacityReport:
    mode: str
    hbm_only: float
    with_offload: float
    pool_share: float
    pinned_fraction: float
    offloadable: float

    @property
    def gain(self) -> float:
        return self.with_offload / self.hbm_only

    def to_dict(self) -> dict[str, Any]:
        return {**asdict(self), "gain": self.gain}


def max_capacity(topology: Topology, mode: str = "training", pinned_fraction: float = 0.0,
                 participating_devices: int | None = None) -> CapacityReport:
    """Largest per-device model state with and without the pool.

    With a fraction ``p`` of the state pinned in HBM, the state ``M`` must
    satisfy ``M <= HBM + share`` and ``p*M <= HBM``; the offloadable part is
    ``(1-p) * M``.  The capacity model is the same in both modes.
    """
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}", field="mode")
    if not 0.0 <= pinned_fraction <= 1.0:
        raise ConfigError("pinned_fraction must be within [0, 1]", field="pinned_fraction")
    hbm = float(topology.hbm_capacity_per_device)
    share = topology.pool_share(participating_devices)
    with_pool = hbm + share
    if pinned_fraction > 0:
        with_pool = min(with_pool, hbm / pinned_fraction)
    return CapacityReport(mode, hbm, with_pool, share, pinned_fraction, (1.0 - pinned_fraction) * with_pool)


# sequence length ----------------------------------------------------------

@dataclass(frozen=True)
class SeqLenResult:
    hbm_only: int
    with_offload: int
    budget: float
    hbm_only_step_time: float | None
    offload_step_time: float | None
    diagnostics: tuple[str, ...] = ()

    @property
    def ratio(self) -> float:
        return self.with_offload / self.hbm_only if self.hbm_only else math.inf

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["budget"] = None if math.isinf(self.budget) else self.budget
        d["ratio"] = None if math.isinf(self.ratio) else self.ratio
        d["diagnostics"] = list(self.diagnostics)
        return d


def _capacity_seq_limit(model: ModelSpec, capacity: float) -> int:
    """Largest length whose weights plus chunk-rounded KV fit ``capacity``."""
    per_chunk = model.kv_block_tokens * model.kv_bytes_per_token
    room = capacity - model.weight_bytes
    if room < 0 or per_chunk == 0:
        return 0 if room < 0 else 10**12
    return int(room // per_chunk) * model.kv_block_tokens


def token_time_hbm_only(model: ModelSpec, seq_len: int, topology: Topology) -> float:
    return sum(model.decode_time(layer, seq_len, topology.hbm_bandwidth) for layer in model.layers)


def token_time_offload(model: ModelSpec, seq_len: int, topology: Topology, lookahead: int = 1) -> float:
    """Steady-state time of the token at length ``seq_len`` (stall included).

    Decodes the two tokens ending at ``seq_len`` and times the second, so the
    HBM contents reflect a previous token's accesses rather than the preload.
    """
    context = max(0, seq_len - 2)
    steps = seq_len - context
    seq = build_access_sequence(model.with_context(context, steps), "inference", topology.hbm_bandwidth)
    plan = plan_offload(seq, topology, lookahead)
    rep = simulate_plan(plan, seq, topology)
    n = len(model.layers)
    boundary = sum(seq.steps[k].compute_duration + rep.step_stalls[k] for k in range(len(seq.steps) - n))
    return rep.step_time_with_offload - boundary


def _largest(pred, hi: int) -> int:
    """Largest ``s`` in ``[1, hi]`` with ``pred(s)`` true, assuming monotone; 0 if none."""
    if hi < 1 or not pred(1):
        return 0
    lo = 1
    if pred(hi):
        return hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def max_seq_under_latency(model: ModelSpec, budget: float, topology: Topology, lookahead: int = 1,
                          participating_devices: int | None = None) -> SeqLenResult:
    if not budget > 0:
        raise ConfigError("latency budget must be positive", field="latency_budget")
    if model.kv_bytes_per_token == 0:
        raise ConfigError("model has no KV cache; sequence length is unbounded", field="kv_bytes_per_token")
    hbm = topology.hbm_capacity_per_device
    cap = max_capacity(topology, "inference", participating_devices=participating_devices)
    diagnostics = []

    hbm_limit = _capacity_seq_limit(model, hbm)
    hbm_len = _largest(lambda s: token_time_hbm_only(model, s, topology) <= budget, hbm_limit)

    off_limit = _capacity_seq_limit(model, cap.with_offload)
    if cap.with_offload == hbm:
        off_len = hbm_len
    else:
        def fits(s: int) -> bool:
            try:
                return token_time_offload(model, s, topology, lookahead) <= budget
            except InfeasibleError:
                return False
        off_len = _largest(fits, off_limit)
    if hbm_len == 0 or off_len == 0:
        minimum = token_time_hbm_only(model, 1, topology)
        diagnostics.append(f"latency budget {budget:g}s is below the minimum step time "
                           f"{minimum:g}s (or state does not fit)")
    return SeqLenResult(
        hbm_only=hbm_len,
        with_offload=off_len,
        budget=budget,
        hbm_only_step_time=token_time_hbm_only(model, hbm_len, topology) if hbm_len else None,
        offload_step_time=(token_time_offload(model, off_len, topology, lookahead)
                           if off_len and cap.with_offload != hbm else
                           (token_time_hbm_only(model, off_len, topology) if off_len else None)),
        diagnostics=tuple(diagnostics),
    )


# data parallelism -----------------------------------------------------------

@dataclass(frozen=True)
class NDPlan:
    """Reference tensor/pipeline/data-parallel plan for comparison against 1D data parallelism.

    ``tp_collectives`` lists per-step tensor-parallel collectives as
    ``{kind, bytes_per_rank, count}`` over a TP group of consecutive ranks;
    ``pp_bytes`` is the activation volume sent between adjacent stages per
    micro-batch, each direction.
    """

    tp: int
    pp: int
    dp: int
    microbatches: int = 1
    tp_collectives: tuple[Mapping[str, Any], ...] = ()
    pp_bytes: float = 0.0

    @property
    def devices(self) -> int:
        return self.tp * self.pp * self.dp

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NDPlan":
        try:
            plan = cls(int(d["tp"]), int(d["pp"]), int(d["dp"]), int(d.get("microbatches", 1)),
                       tuple(d.get("tp_collectives") or ()), float(d.get("pp_bytes", 0)))
        except KeyError as exc:
            raise ConfigError(f"ND plan is missing {exc.args[0]!r}", field=str(exc.args[0])) from None
        if min(plan.tp, plan.pp, plan.dp, plan.microbatches) < 1:
            raise ConfigError("tp, pp, dp and microbatches must be >= 1", field="nd_plan")
        return plan


@dataclass(frozen=True)
class DPEstimate:
    plan: str
    feasible: bool
    needs_offload: bool
    state_bytes_per_device: float
    compute_time: float
    offload_stall: float
    sync_time: float
    parallel_overhead: float
    step_time: float
    detail: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _grad_sync(grad_bytes: float, ranks: list[int], topology: Topology) -> float:
    if len(ranks) < 2:
        return 0.0
    return group_time(CollectiveKind.ALL_REDUCE, grad_bytes, ranks, topology)


def dp_feasibility(model: ModelSpec, topology: Topology, plan: str = "1d_dp", nd: NDPlan | None = None,
                   devices: int | None = None, lookahead: int = 1) -> DPEstimate:
    """Per-step estimate for 1D data parallelism (with offload when needed) or a reference ND plan.

    Layer compute times in ``model`` are the single-device times for the whole
    global batch; ``devices`` ranks share that work evenly.
    """
    devices = topology.device_count if devices is None else devices
    if devices < 1 or devices > topology.device_count:
        raise ConfigError(f"devices must be within [1, {topology.device_count}]", field="devices")
    state = float(model.training_state_bytes())
    hbm = topology.hbm_capacity_per_device
    grads = float(model.weight_bytes)
    total_compute = sum(l.compute_time + l.backward for l in model.layers)

    if plan == "1d_dp":
        share = topology.pool_share(devices)
        needs_offload = state > hbm
        feasible = state <= hbm + share
        compute = total_compute / devices
        stall = 0.0
        detail: dict[str, Any] = {"pool_share": share}
        if feasible and needs_offload:
            seq = build_access_sequence(per_device_model(model, devices), "training")
            mplan = plan_offload(seq, topology, lookahead)
            rep = simulate_plan(mplan, seq, topology)
            stall = rep.total_stall
            detail["offload"] = rep.to_dict()
        sync = _grad_sync(grads, list(range(devices)), topology)
        return DPEstimate("1d_dp", feasible, needs_offload, state, compute, stall, sync, 0.0,
                          compute + stall + sync, detail)

    if plan != "nd":
        raise ConfigError(f"unknown parallel plan {plan!r} (expected 1d_dp or nd)", field="plan")
    if nd is None:
        raise ConfigError("the nd plan needs a plan description", field="nd_plan")
    if nd.devices > devices:
        raise ConfigError(f"ND plan uses {nd.devices} devices but only {devices} are available", field="nd_plan")
    per_device_state = state / (nd.tp * nd.pp)
    feasible = per_device_state <= hbm
    base = total_compute / nd.devices
    bubble = (nd.pp - 1) / (nd.microbatches + nd.pp - 1)
    compute = base / (1.0 - bubble)
    tp_group = list(range(nd.tp))
    tp_time = 0.0
    for c in nd.tp_collectives:
        tp_time += int(c.get("count", 1)) * group_time(c["kind"], float(c["bytes_per_rank"]), tp_group, topology)
    pp_time = 0.0
    if nd.pp > 1 and nd.pp_bytes:
        a, b = 0, nd.tp  # first ranks of two adjacent stages
        pp_time = 2 * nd.microbatches * group_time(CollectiveKind.POINT_TO_POINT, nd.pp_bytes, [a, b], topology)
    dp_ranks = [k * nd.tp * nd.pp for k in range(nd.dp)]
    sync = _grad_sync(grads / (nd.tp * nd.pp), dp_ranks, topology)
    overhead = tp_time + pp_time
    return DPEstimate("nd", feasible, False, per_device_state, compute, 0.0, sync, overhead,
                      compute + overhead + sync,
                      {"bubble_fraction": bubble, "tp_time": tp_time, "pp_time": pp_time})


def per_device_model(model: ModelSpec, devices: int) -> ModelSpec:
    """``model`` with forward and backward times split evenly over ``devices`` data-parallel ranks."""
    layers = tuple(replace(l, compute_time=l.compute_time / devices, backward_time=l.backward / devices)
                   for l in model.layers)
    return replace(model, layers=layers)
