"""YAML/JSON document loading with line tracking and unit parsing.

Every document is parsed into plain dicts and lists, except that mappings are
returned as :class:`Node` (a ``dict`` subclass) remembering the source line of
each key, so validation errors can point at ``file:line``.
"""

from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError

_TIME_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(ns|us|µs|ms|s)?\s*$")
_TIME_DIVISOR = {None: 1.0, "s": 1.0, "ms": 1e3, "us": 1e6, "µs": 1e6, "ns": 1e9}


class Node(dict):
    """A mapping that knows where it (and each of its keys) came from."""

    source: str | None = None
    line: int | None = None

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        self.key_lines: dict[Any, int] = {}

    def line_of(self, key: Any) -> int | None:
        return self.key_lines.get(key, self.line)


class _Loader(yaml.SafeLoader):
    pass


def _construct_node(loader: _Loader, node: yaml.MappingNode) -> Node:
    loader.flatten_mapping(node)
    out = Node()
    out.source = loader.source_name
    out.line = node.start_mark.line + 1
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        out[key] = loader.construct_object(value_node, deep=True)
        out.key_lines[key] = key_node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_node)


def loads(text: str, source: str | None = None) -> Any:
    """Parse a YAML (or JSON, which is a YAML subset) document."""
    loader = _Loader(text)
    loader.source_name = source
    try:
        return loader.get_single_data()
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"malformed document: {problem}", source=source, line=line) from exc
    finally:
        loader.dispose()


def load_file(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", source=str(path)) from exc
    return loads(text, source=str(path))


def fail(message: str, doc: Any = None, key: Any = None, field: str | None = None) -> ConfigError:
    """Build a ConfigError located at ``doc[key]`` when line data is available."""
    source = line = None
    if isinstance(doc, Node):
        source = doc.source
        line = doc.line_of(key) if key is not None else doc.line
    return ConfigError(message, field=field if field is not None else (str(key) if key is not None else None),
                       source=source, line=line)


def require_mapping(doc: Any, what: str) -> dict:
    if not isinstance(doc, dict):
        raise fail(f"{what} must be a mapping, got {type(doc).__name__}", doc, field=what)
    return doc


def parse_seconds(value: Any, field: str, doc: Any = None) -> float:
    """Decimal seconds, or a string with an ``ns``/``us``/``ms``/``s`` suffix."""
    if isinstance(value, bool):
        raise fail(f"{field}: expected a time, got {value!r}", doc, field, field)
    if isinstance(value, (int, float)):
        seconds = float(value)
    elif isinstance(value, str):
        m = _TIME_RE.match(value)
        if not m:
            raise fail(f"{field}: cannot parse time {value!r}", doc, field, field)
        seconds = float(m.group(1)) / _TIME_DIVISOR[m.group(2)]
    else:
        raise fail(f"{field}: expected a time, got {type(value).__name__}", doc, field, field)
    if math.isnan(seconds):
        raise fail(f"{field}: time is NaN", doc, field, field)
    return seconds


def parse_bytes(value: Any, field: str, doc: Any = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise fail(f"{field}: byte quantities must be integers, got {value!r}", doc, field, field)
    return value


def parse_number(value: Any, field: str, doc: Any = None) -> float:
    """A plain number; numeric strings such as ``1.0e11`` (which YAML 1.1 leaves as text) are accepted."""
    if isinstance(value, bool):
        raise fail(f"{field}: expected a number, got {value!r}", doc, field, field)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    raise fail(f"{field}: expected a number, got {value!r}", doc, field, field)


def get(doc: dict, key: str, what: str | None = None) -> Any:
    if key not in doc:
        label = f"{what}.{key}" if what else key
        raise fail(f"missing field {label!r}", doc, None, key)
    return doc[key]
