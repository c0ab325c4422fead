"""State blocks, access sequences, and layered model specs.

Model file format::

    mode: training            # or inference
    layers: 4                 # count with a shared `layer:` block, or a list of layer mappings
    layer:
      weight_bytes: 2147483648
      activation_bytes: 1073741824
      optimizer_bytes: 0
      kv_bytes_per_token: 65536
      compute_time: 10ms      # forward time (training) / fixed decode time per layer (inference)
      backward_time: 20ms     # defaults to 2x compute_time
      decode_time_per_token: 40ns   # inference only; defaults to kv_bytes_per_token / hbm_bandwidth
    pin_weights: false
    inference: {context_tokens: 1024, decode_steps: 2, kv_block_tokens: 1024, latency_budget: 60ms}
    lookahead: 1
    participating_devices: 8  # devices sharing the pool (default: all)

Block ids are ``W<i>`` (weights), ``A<i>`` (activations), ``O<i>``
(optimizer state) and ``KV<i>.<chunk>``, with layers numbered from 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any

from .. import configio
from ..errors import ConfigError

BLOCK_KINDS = ("weight", "activation", "kv_cache", "optimizer")
MODES = ("training", "inference")


@dataclass(frozen=True)
class StateBlock:
    id: str
    size: int
    kind: str = "weight"
    pinned: bool = False

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ConfigError(f"block {self.id!r}: size must be positive", field="size")
        if self.kind not in BLOCK_KINDS:
            raise ConfigError(f"block {self.id!r}: unknown kind {self.kind!r}", field="kind")


@dataclass(frozen=True)
class Step:
    compute_duration: float
    blocks_read: tuple[str, ...] = ()
    blocks_written: tuple[str, ...] = ()
    label: str = ""

    @cached_property
    def touched(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.blocks_read + self.blocks_written))


@dataclass(frozen=True)
class AccessSequence:
    blocks: dict[str, StateBlock]
    steps: tuple[Step, ...]

    def __post_init__(self) -> None:
        for i, step in enumerate(self.steps):
            if not step.compute_duration > 0:
                raise ConfigError(f"step {i} ({step.label}): compute duration must be positive",
                                  field="compute_duration")
            for b in step.touched:
                if b not in self.blocks:
                    raise ConfigError(f"step {i} ({step.label}) references undeclared block {b!r}", field="blocks")

    @classmethod
    def from_reads(cls, sizes: dict[str, int], order: list[str] | str, duration: float = 1.0,
                   pinned: tuple[str, ...] = ()) -> "AccessSequence":
        """Read-only sequence touching one block per step; handy for small experiments."""
        blocks = {b: StateBlock(b, s, pinned=b in pinned) for b, s in sizes.items()}
        steps = tuple(Step(duration, (b,), (), f"{i}:{b}") for i, b in enumerate(order))
        return cls(blocks, steps)

    @property
    def compute_total(self) -> float:
        return sum(s.compute_duration for s in self.steps)

    def labels(self) -> list[str]:
        return [s.label for s in self.steps]


@dataclass(frozen=True)
class LayerSpec:
    weight_bytes: int
    compute_time: float
    activation_bytes: int = 0
    optimizer_bytes: int = 0
    kv_bytes_per_token: int = 0
    backward_time: float | None = None
    decode_time_per_token: float | None = None

    def __post_init__(self) -> None:
        if self.weight_bytes <= 0:
            raise ConfigError("weight_bytes must be positive", field="weight_bytes")
        if not self.compute_time > 0:
            raise ConfigError("compute_time must be positive", field="compute_time")
        for name in ("activation_bytes", "optimizer_bytes", "kv_bytes_per_token"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative", field=name)
        if self.backward_time is not None and not self.backward_time > 0:
            raise ConfigError("backward_time must be positive", field="backward_time")

    @property
    def backward(self) -> float:
        return 2.0 * self.compute_time if self.backward_time is None else self.backward_time


@dataclass(frozen=True)
class ModelSpec:
    layers: tuple[LayerSpec, ...]
    pin_weights: bool = False
    context_tokens: int = 0
    decode_steps: int = 1
    kv_block_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.context_tokens < 0 or self.decode_steps < 1 or self.kv_block_tokens < 1:
            raise ConfigError("context_tokens >= 0, decode_steps >= 1 and kv_block_tokens >= 1 are required",
                              field="inference")

    @property
    def weight_bytes(self) -> int:
        return sum(l.weight_bytes for l in self.layers)

    @property
    def kv_bytes_per_token(self) -> int:
        return sum(l.kv_bytes_per_token for l in self.layers)

    def kv_bytes(self, seq_len: int) -> int:
        """KV bytes held for ``seq_len`` tokens, rounded up to whole chunks."""
        chunks = math.ceil(seq_len / self.kv_block_tokens)
        return chunks * self.kv_block_tokens * self.kv_bytes_per_token

    def training_state_bytes(self) -> int:
        return sum(l.weight_bytes + l.activation_bytes + l.optimizer_bytes for l in self.layers)

    def with_context(self, context_tokens: int, decode_steps: int) -> "ModelSpec":
        return replace(self, context_tokens=context_tokens, decode_steps=decode_steps)

    def decode_time(self, layer: LayerSpec, seq_len: int, hbm_bandwidth: float | None = None) -> float:
        per_token = layer.decode_time_per_token
        if per_token is None:
            per_token = layer.kv_bytes_per_token / hbm_bandwidth if hbm_bandwidth else 0.0
        return layer.compute_time + per_token * seq_len


def build_access_sequence(model: ModelSpec, mode: str, hbm_bandwidth: float | None = None) -> AccessSequence:
    """Training: forward F1..Fn then backward Bn..B1.  Inference: one step per (token, layer)."""
    if not model.layers:
        raise ConfigError("model has no layers", field="layers")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}", field="mode")
    blocks: dict[str, StateBlock] = {}
    steps: list[Step] = []
    n = len(model.layers)
    for i, layer in enumerate(model.layers, start=1):
        blocks[f"W{i}"] = StateBlock(f"W{i}", layer.weight_bytes, "weight", model.pin_weights)

    if mode == "training":
        for i, layer in enumerate(model.layers, start=1):
            writes = ()
            if layer.activation_bytes:
                blocks[f"A{i}"] = StateBlock(f"A{i}", layer.activation_bytes, "activation")
                writes = (f"A{i}",)
            if layer.optimizer_bytes:
                blocks[f"O{i}"] = StateBlock(f"O{i}", layer.optimizer_bytes, "optimizer")
            steps.append(Step(layer.compute_time, (f"W{i}",), writes, f"F{i}"))
        for i in range(n, 0, -1):
            layer = model.layers[i - 1]
            reads = [f"W{i}"]
            writes = []
            if layer.activation_bytes:
                reads.append(f"A{i}")
            if layer.optimizer_bytes:
                reads.append(f"O{i}")
                writes.append(f"O{i}")
            steps.append(Step(layer.backward, tuple(reads), tuple(writes), f"B{i}"))
        return AccessSequence(blocks, tuple(steps))

    chunk = model.kv_block_tokens
    for t in range(model.decode_steps):
        seq_len = model.context_tokens + t + 1
        n_chunks = math.ceil(seq_len / chunk)
        for i, layer in enumerate(model.layers, start=1):
            reads = [f"W{i}"]
            writes = []
            if layer.kv_bytes_per_token:
                opens_chunk = (seq_len - 1) % chunk == 0
                for c in range(n_chunks):
                    bid = f"KV{i}.{c}"
                    if bid not in blocks:
                        blocks[bid] = StateBlock(bid, chunk * layer.kv_bytes_per_token, "kv_cache")
                    # a chunk opened by this token is created here: written, not read
                    if not (opens_chunk and c == n_chunks - 1):
                        reads.append(bid)
                writes.append(f"KV{i}.{n_chunks - 1}")
            steps.append(Step(model.decode_time(layer, seq_len, hbm_bandwidth), tuple(reads), tuple(writes),
                              f"T{t}.L{i}"))
    return AccessSequence(blocks, tuple(steps))


# model files ------------------------------------------------------------

_LAYER_BYTES = ("weight_bytes", "activation_bytes", "optimizer_bytes", "kv_bytes_per_token")
_LAYER_TIMES = ("compute_time", "backward_time", "decode_time_per_token")


def _parse_layer(entry: Any) -> LayerSpec:
    entry = configio.require_mapping(entry, "layer")
    kwargs: dict[str, Any] = {}
    for key in _LAYER_BYTES:
        if key in entry:
            kwargs[key] = configio.parse_bytes(entry[key], key, entry)
    for key in _LAYER_TIMES:
        if key in entry:
            kwargs[key] = configio.parse_seconds(entry[key], key, entry)
    for key in ("weight_bytes", "compute_time"):
        if key not in kwargs:
            raise configio.fail(f"layer is missing {key!r}", entry, None, key)
    unknown = sorted(set(entry) - set(_LAYER_BYTES) - set(_LAYER_TIMES))
    if unknown:
        raise configio.fail(f"unknown layer field(s): {', '.join(map(str, unknown))}", entry, unknown[0])
    try:
        return LayerSpec(**kwargs)
    except ConfigError as exc:
        raise configio.fail(exc.message, entry, exc.field) from None


@dataclass
class ModelFile:
    model: ModelSpec
    mode: str
    lookahead: int = 1
    latency_budget: float | None = None
    participating_devices: int | None = None
    training: dict[str, Any] = field(default_factory=dict)


def parse_model_document(doc: Any) -> ModelFile:
    doc = configio.require_mapping(doc, "model")
    mode = doc.get("mode", "training")
    if mode not in MODES:
        raise configio.fail(f"mode must be one of {', '.join(MODES)}, got {mode!r}", doc, "mode")
    raw_layers = configio.get(doc, "layers")
    if isinstance(raw_layers, int) and not isinstance(raw_layers, bool):
        if raw_layers < 1:
            raise configio.fail("layers must be >= 1", doc, "layers")
        shared = _parse_layer(configio.get(doc, "layer"))
        layers = tuple([shared] * raw_layers)
    elif isinstance(raw_layers, list) and raw_layers:
        layers = tuple(_parse_layer(e) for e in raw_layers)
    else:
        raise configio.fail("layers must be a positive count or a non-empty list", doc, "layers")

    inf = doc.get("inference") or {}
    budget = None
    if "latency_budget" in inf:
        budget = math.inf if inf["latency_budget"] in ("inf", ".inf", math.inf) else \
            configio.parse_seconds(inf["latency_budget"], "latency_budget", inf)
    try:
        model = ModelSpec(layers, bool(doc.get("pin_weights", False)), int(inf.get("context_tokens", 0)),
                          int(inf.get("decode_steps", 1)), int(inf.get("kv_block_tokens", 1024)))
    except ConfigError as exc:
        raise configio.fail(exc.message, doc, "inference" if "inference" in doc else None) from None
    lookahead = doc.get("lookahead", 1)
    if isinstance(lookahead, bool) or not isinstance(lookahead, int) or lookahead < 1:
        raise configio.fail("lookahead must be an integer >= 1", doc, "lookahead")
    devices = doc.get("participating_devices")
    if devices is not None and (isinstance(devices, bool) or not isinstance(devices, int) or devices < 1):
        raise configio.fail("participating_devices must be a positive integer", doc, "participating_devices")
    training = doc.get("training") or {}
    return ModelFile(model, mode, lookahead, budget, devices, dict(training))


def load_model_file(path: str | Path) -> ModelFile:
    return parse_model_document(configio.load_file(path))
