"""Lineage-preserving JSON serialisation of enriched records.

Each record becomes an object whose ``record`` key holds the CDX metadata.
Every marked field is emitted together with the chain of fields it was
derived from, so ``payload.string`` appears as ``{"payload": {"string": ...}}``.
Only marked nodes contribute their own value; when a marked node also has
marked descendants, its value moves to the ``_`` key next to them.
"""

from __future__ import annotations

import base64
import gzip
import io
import json
import os
from collections.abc import Mapping
from typing import Any, Iterable, Iterator

from .cdx import CdxRecord, timestamp_to_iso
from .model import EnrichedRecord, FieldNode
from .warc import Headers

UNDERSCORE = "_"


def metadata_to_dict(meta: CdxRecord) -> dict[str, Any]:
    return {
        "surtUrl": meta.surt_url,
        "timestamp": timestamp_to_iso(meta.timestamp),
        "originalUrl": meta.original_url,
        "mime": meta.mime,
        "status": meta.status,
        "digest": meta.digest,
        "redirectUrl": meta.redirect_url or "-",
        "meta": meta.meta_tags or "-",
    }


def encode_value(value: Any, base64_bytes: bool = False) -> Any:
    if isinstance(value, (bytes, bytearray)):
        if base64_bytes:
            return base64.b64encode(bytes(value)).decode("ascii")
        return f"bytes(length: {len(value)})"
    if isinstance(value, Headers):
        return value.to_dict()
    if isinstance(value, Mapping):
        return {str(k): encode_value(v, base64_bytes) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        return [encode_value(v, base64_bytes) for v in value]
    if value is None or isinstance(value, (str, int, float, bool)):
        return value
    return str(value)


def _emit(node: FieldNode, prefix: str, marks: frozenset[str],
          base64_bytes: bool) -> Any:
    out: dict[str, Any] = {}
    for key, child in node.children.items():
        path = f"{prefix}.{key}" if prefix else key
        if path in marks or any(m.startswith(path + ".") for m in marks):
            out[key] = _emit(child, path, marks, base64_bytes)
    own = prefix in marks and node.has_value
    if not out:
        return encode_value(node.value, base64_bytes) if own else {}
    if own:
        return {UNDERSCORE: encode_value(node.value, base64_bytes), **out}
    return out


def record_to_dict(record: EnrichedRecord, base64_bytes: bool = False) -> dict[str, Any]:
    out = {"record": metadata_to_dict(record.meta)}
    out.update(_emit(record.tree, "", record.output_marks, base64_bytes))
    return out


def record_to_json(record: EnrichedRecord, pretty: bool = False,
                   base64_bytes: bool = False) -> str:
    obj = record_to_dict(record, base64_bytes)
    if pretty:
        return json.dumps(obj, indent=2, ensure_ascii=False)
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def _open_output(path: str | os.PathLike):
    raw = open(path, "wb")
    if os.fspath(path).endswith(".gz"):
        gz = gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0)
        return io.TextIOWrapper(gz, encoding="utf-8", newline="\n"), (gz, raw)
    return io.TextIOWrapper(raw, encoding="utf-8", newline="\n"), (raw,)


def save_corpus(records: Iterable[EnrichedRecord], path: str | os.PathLike,
                pretty: bool = False, base64_bytes: bool = False) -> int:
    """Write one JSON object per record; gzip when ``path`` ends in ``.gz``."""
    text, handles = _open_output(path)
    count = 0
    try:
        for record in records:
            text.write(record_to_json(record, pretty, base64_bytes))
            text.write("\n")
            count += 1
        text.flush()
    finally:
        text.detach()
        for h in handles:
            h.close()
    return count


def iter_json_objects(text: str) -> Iterator[Any]:
    decoder = json.JSONDecoder()
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            return
        obj, pos = decoder.raw_decode(text, pos)
        yield obj


def load_corpus(path: str | os.PathLike) -> list[Any]:
    """Read back a file written by :func:`save_corpus` (compact or pretty)."""
    opener = gzip.open if os.fspath(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        return list(iter_json_objects(fh.read()))
