"""Layout declaration files.

Example (the 2x2 case)::

    device_matrix: [2, 2]          # 4 accelerators as a 2x2 grid
    alias_name: ["x", "y"]         # one name per device-matrix axis
    element_bytes: 4               # optional, used for reshard costs
    ranks: [0, 1, 2, 3]            # optional coordinate -> rank binding (row-major)
    tensors:
      weight:
        shape: [2, 2]
        tensor_map: ["x", "y"]     # "None" replicates a dimension
    reshard:                       # optional
      - {from: weight, to: weight_t}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .. import configio
from ..errors import ConfigError
from .layout import Layout, ShardStrategy, derive_strategy, normalize_tensor_map


@dataclass(frozen=True)
class TensorDecl:
    name: str
    shape: tuple[int, ...]
    tensor_map: tuple[str | None, ...]
    strategy: ShardStrategy


@dataclass
class LayoutFile:
    layout: Layout
    tensors: dict[str, TensorDecl]
    element_bytes: int = 4
    ranks: list[int] | None = None
    reshards: list[tuple[str, str]] = field(default_factory=list)


def parse_layout_document(doc: Any, device_count: int | None = None) -> LayoutFile:
    doc = configio.require_mapping(doc, "layout")
    dims = configio.get(doc, "device_matrix")
    aliases = configio.get(doc, "alias_name")
    if not isinstance(dims, list) or not isinstance(aliases, list):
        raise configio.fail("device_matrix and alias_name must be lists", doc, "device_matrix")
    try:
        layout = Layout(tuple(dims), tuple(aliases), device_count=device_count)
    except ConfigError as exc:
        raise configio.fail(exc.message, doc, exc.field) from None

    element_bytes = doc.get("element_bytes", 4)
    if isinstance(element_bytes, bool) or not isinstance(element_bytes, int) or element_bytes <= 0:
        raise configio.fail(f"element_bytes must be a positive integer, got {element_bytes!r}", doc, "element_bytes")
    ranks = doc.get("ranks")
    if ranks is not None:
        if not isinstance(ranks, list) or len(ranks) != layout.size or len(set(ranks)) != len(ranks):
            raise configio.fail(f"ranks must list {layout.size} distinct ranks", doc, "ranks")

    tensors_doc = configio.require_mapping(configio.get(doc, "tensors"), "tensors")
    tensors: dict[str, TensorDecl] = {}
    for name, spec in tensors_doc.items():
        if not isinstance(spec, dict):
            raise configio.fail(f"tensor {name!r} must be a mapping", tensors_doc, name)
        shape = configio.get(spec, "shape", f"tensors.{name}")
        tmap = configio.get(spec, "tensor_map", f"tensors.{name}")
        if not isinstance(shape, list) or not isinstance(tmap, list):
            raise configio.fail(f"tensor {name!r}: shape and tensor_map must be lists", spec, "shape")
        try:
            strategy = derive_strategy(layout, tmap, tuple(shape))
        except ConfigError as exc:
            raise configio.fail(f"tensor {name!r}: {exc.message}", spec, exc.field) from None
        tensors[str(name)] = TensorDecl(str(name), tuple(shape), normalize_tensor_map(tmap), strategy)

    reshards = []
    for i, entry in enumerate(doc.get("reshard") or []):
        if not isinstance(entry, dict) or "from" not in entry or "to" not in entry:
            raise configio.fail(f"reshard[{i}] needs 'from' and 'to'", doc, "reshard")
        a, b = str(entry["from"]), str(entry["to"])
        for t in (a, b):
            if t not in tensors:
                raise configio.fail(f"reshard[{i}] names undeclared tensor {t!r}", entry, "from")
        if tensors[a].shape != tensors[b].shape:
            raise configio.fail(f"reshard[{i}]: {a!r} and {b!r} have different shapes", entry, "to")
        reshards.append((a, b))
    return LayoutFile(layout, tensors, element_bytes, ranks, reshards)


def load_layout_file(path: str | Path, device_count: int | None = None) -> LayoutFile:
    return parse_layout_document(configio.load_file(path), device_count)
