"""Hierarchical HBM / DRAM-pool offload planning and simulation."""

from .capacity import (CapacityReport, DPEstimate, NDPlan, SeqLenResult, dp_feasibility, max_capacity,
                       max_seq_under_latency, per_device_model, token_time_hbm_only, token_time_offload)
from .model import (AccessSequence, LayerSpec, ModelFile, ModelSpec, StateBlock, Step, build_access_sequence,
                    load_model_file, parse_model_document)
from .planner import MemoryPlan, Offload, Prefetch, initial_residency, plan_offload
from .simulate import OffloadReport, check_plan, simulate_plan

__all__ = [
    "AccessSequence", "CapacityReport", "DPEstimate", "LayerSpec", "MemoryPlan", "ModelFile", "ModelSpec",
    "NDPlan", "Offload", "OffloadReport", "Prefetch", "SeqLenResult", "StateBlock", "Step",
    "build_access_sequence", "check_plan", "dp_feasibility", "initial_residency", "load_model_file",
    "max_capacity", "max_seq_under_latency", "parse_model_document", "per_device_model", "plan_offload", "simulate_plan",
    "token_time_hbm_only", "token_time_offload",
]
