"""Enriched records: CDX metadata plus an immutable tree of derived fields.

Derived values live in a tree addressed by dot paths (``payload.string``).
A node may hold its own value *and* children; in JSON output the value then
appears under the ``_`` key.  All updates return new records, sharing
untouched subtrees with the original.
"""

from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any

from .cdx import CdxRecord
from .errors import PathError, TypedAccessError
from .warc import Headers

KEY_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_-]*$")
METADATA_ROOT = "record"
ERROR_ROOT = "error"


class _Missing:
    def __repr__(self) -> str:
        return "MISSING"

    def __bool__(self) -> bool:
        return False


MISSING: Any = _Missing()

# JSON-style and attribute-style names for metadata under ``record.``
METADATA_FIELDS = {
    "surtUrl": "surt_url",
    "timestamp": "timestamp",
    "originalUrl": "original_url",
    "mime": "mime",
    "status": "status",
    "digest": "digest",
    "redirectUrl": "redirect_url",
    "meta": "meta_tags",
    "compressedLength": "compressed_length",
    "offset": "offset",
    "filename": "filename",
}
METADATA_FIELDS.update({v: v for v in list(METADATA_FIELDS.values())})


@dataclass(frozen=True)
class FieldNode:
    value: Any = MISSING
    children: Mapping[str, "FieldNode"] = field(
        default_factory=lambda: MappingProxyType({}))

    @property
    def has_value(self) -> bool:
        return self.value is not MISSING

    def child(self, key: str) -> "FieldNode | None":
        return self.children.get(key)

    def with_child(self, key: str, node: "FieldNode") -> "FieldNode":
        children = dict(self.children)
        children[key] = node
        return FieldNode(self.value, MappingProxyType(children))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FieldNode):
            return NotImplemented
        return (_values_equal(self.value, other.value)
                and dict(self.children) == dict(other.children))

    __hash__ = None  # type: ignore[assignment]


def _values_equal(a: Any, b: Any) -> bool:
    if a is MISSING or b is MISSING:
        return a is b
    return type(a) is type(b) and a == b


def split_path(path: str) -> list[str]:
    segments = path.split(".")
    for seg in segments:
        if not KEY_RE.match(seg):
            raise PathError(f"invalid path segment {seg!r} in {path!r}")
    return segments


def join_path(*parts: str) -> str:
    return ".".join(p for p in parts if p)


@dataclass(frozen=True)
class EnrichedRecord:
    meta: CdxRecord
    tree: FieldNode = field(default_factory=FieldNode)
    output_marks: frozenset[str] = frozenset()
    applied: frozenset[str] = frozenset()

    def get(self, path: str, default: Any = None) -> Any:
        return get_path(self, path, default)

    def get_as(self, path: str, kind: type | tuple[type, ...]) -> Any:
        """Like :meth:`get`, but the value must be an instance of ``kind``."""
        value = get_path(self, path, MISSING)
        if value is MISSING:
            raise TypedAccessError(f"no value at {path!r}")
        if not isinstance(value, kind):
            raise TypedAccessError(
                f"value at {path!r} is {type(value).__name__}, not {kind}")
        return value

    def set(self, path: str, value: Any) -> "EnrichedRecord":
        return set_path(self, path, value)

    def mark(self, *paths: str) -> "EnrichedRecord":
        return replace(self, output_marks=self.output_marks | frozenset(paths))

    def with_applied(self, *names: str) -> "EnrichedRecord":
        return replace(self, applied=self.applied | frozenset(names))

    def node(self, path: str) -> FieldNode | None:
        node = self.tree
        for seg in path.split("."):
            node = node.child(seg)
            if node is None:
                return None
        return node

    @property
    def errors(self) -> dict[str, Any]:
        node = self.tree.child(ERROR_ROOT)
        if node is None:
            return {}
        return {k: v.value for k, v in node.children.items()}


def _descend_value(value: Any, segments: list[str], default: Any) -> Any:
    for seg in segments:
        if isinstance(value, Headers):
            found = value.get(seg)
            if found is None:
                return default
            value = found
        elif isinstance(value, Mapping) and seg in value:
            value = value[seg]
        else:
            return default
    return value


def get_path(record: EnrichedRecord, path: str, default: Any = None) -> Any:
    """Value at ``path``, or ``default`` if any segment is missing.

    ``record.<field>`` addresses the CDX metadata.  Once a path reaches a
    node whose value is a mapping (such as a header block), the remaining
    segments index into that mapping.
    """
    segments = path.split(".")
    if segments[0] == METADATA_ROOT:
        if len(segments) != 2 or segments[1] not in METADATA_FIELDS:
            return default
        return getattr(record.meta, METADATA_FIELDS[segments[1]])
    node = record.tree
    for i, seg in enumerate(segments):
        child = node.child(seg)
        if child is None:
            if node.has_value and i > 0:
                return _descend_value(node.value, segments[i:], default)
            return default
        node = child
    return node.value if node.has_value else default


def _set(node: FieldNode, segments: list[str], value: Any) -> FieldNode:
    if not segments:
        return FieldNode(value, node.children)
    head, rest = segments[0], segments[1:]
    child = node.child(head) or FieldNode()
    return node.with_child(head, _set(child, rest, value))


def set_path(record: EnrichedRecord, path: str, value: Any) -> EnrichedRecord:
    """Return a copy of ``record`` with ``value`` stored at ``path``."""
    segments = split_path(path)
    if segments[0] == METADATA_ROOT:
        raise PathError("the 'record' root is read-only metadata")
    if value is None or value is MISSING:
        raise PathError(f"cannot store an empty value at {path!r}")
    return replace(record, tree=_set(record.tree, segments, value))
