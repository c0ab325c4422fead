"""Layout-based tensor sharding: strategy derivation, reference executor, resharding."""

from .executor import Shard, ShardedTensor, execute_plan, gather_tensor, same_placement, shard_tensor
from .layout import NONE, DeviceMatrix, Layout, ShardStrategy, derive_strategy, make_layout
from .layoutfile import LayoutFile, TensorDecl, load_layout_file, parse_layout_document
from .reshard import CollectivePlan, PlanStep, default_binding, infer_reshard, reshard_cost

__all__ = [
    "NONE", "CollectivePlan", "DeviceMatrix", "Layout", "LayoutFile", "PlanStep", "Shard",
    "ShardStrategy", "ShardedTensor", "TensorDecl", "default_binding", "derive_strategy",
    "execute_plan", "gather_tensor", "infer_reshard", "load_layout_file", "make_layout",
    "parse_layout_document", "reshard_cost", "same_placement", "shard_tensor",
]
