"""Enrich functions: named, dependency-resolved derivations on records.

An enrich function declares the function it depends on, which of that
function's result fields it reads, the result fields it produces and a body.
Results are nested below the field they were derived from, which is what
makes the output lineage-preserving.  Applying a function runs its
dependencies implicitly; those are computed (once) but not marked for output.

Bodies must be deterministic and free of side effects: results are memoised
per record and records are processed in parallel.
"""

from __future__ import annotations

import codecs
import html
import inspect
import re
import typing
import zlib
from collections.abc import Mapping
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable

from .cdx import CdxRecord
from .errors import ArchiveError, EnrichmentError, PathError, RegistryError
from .model import ERROR_ROOT, KEY_RE, EnrichedRecord, get_path, join_path, split_path
from .warc import Headers, WarcRecord, parse_http_response

Fetcher = Callable[[CdxRecord], WarcRecord]
Body = Callable[[Any, EnrichedRecord], Mapping[str, Any]]


@dataclass(frozen=True)
class EnrichFunc:
    """Definition of an enrich function.

    ``dependency_field`` names one of the dependency's result fields; the
    value found there is the body's input and this function's results are
    stored as its children.  Root functions (no dependency) receive the
    archived record fetched through the CDX locator and store their results
    at the top of the tree.
    """

    name: str
    dependency: str | None
    dependency_field: str | None
    result_fields: tuple[str, ...]
    body: Body

    def __post_init__(self):
        if not self.result_fields:
            raise RegistryError(f"{self.name}: result_fields must not be empty")
        for f in self.result_fields:
            try:
                split_path(f)
            except PathError as exc:
                raise RegistryError(f"{self.name}: {exc}") from None
        if (self.dependency is None) != (self.dependency_field is None):
            raise RegistryError(
                f"{self.name}: dependency and dependency_field go together")


@dataclass(frozen=True)
class MapEnrich:
    """Ad-hoc single-field enrichment of the value at ``input_path``.

    With ``dependency`` set, ``input_path`` is relative to that function's
    result root and the dependency is applied implicitly first.
    """

    input_path: str
    result_key: str
    body: Callable[[Any], Any]
    dependency: str | None = None

    def __post_init__(self):
        if not KEY_RE.match(self.result_key):
            raise RegistryError(
                f"map enrichment creates exactly one result field; "
                f"{self.result_key!r} is not a single key")
        split_path(self.input_path)
        if _returns_mapping(self.body):
            raise RegistryError(
                "map enrichment bodies return one value, not a mapping of fields")


def _returns_mapping(body: Callable) -> bool:
    try:
        hints = typing.get_type_hints(body)
    except Exception:
        hints = getattr(body, "__annotations__", {}) or {}
    ret = hints.get("return", inspect.Signature.empty)
    origin = typing.get_origin(ret) or ret
    return isinstance(origin, type) and issubclass(origin, Mapping)


class Registry:
    """Name -> :class:`EnrichFunc` table; read-only once execution starts."""

    def __init__(self, funcs: Iterable[EnrichFunc] = ()):
        self._funcs: dict[str, EnrichFunc] = {}
        for f in funcs:
            self.register(f)

    def register(self, func: EnrichFunc) -> EnrichFunc:
        if func.name in self._funcs:
            raise RegistryError(f"enrich function {func.name!r} already registered")
        if func.dependency is not None:
            dep = self._funcs.get(func.dependency)
            if dep is None:
                raise RegistryError(
                    f"{func.name}: unknown dependency {func.dependency!r}")
            if func.dependency_field not in dep.result_fields:
                raise RegistryError(
                    f"{func.name}: {func.dependency!r} has no result field "
                    f"{func.dependency_field!r}")
        self._check_acyclic(func)
        self._funcs[func.name] = func
        return func

    def _check_acyclic(self, func: EnrichFunc) -> None:
        seen = {func.name}
        dep = func.dependency
        while dep is not None:
            if dep in seen:
                raise RegistryError(f"dependency cycle through {dep!r}")
            seen.add(dep)
            dep = self._funcs[dep].dependency

    def rebind(self, name: str, dependency: str, dependency_field: str) -> EnrichFunc:
        """Register a variant of ``name`` reading a different dependency field."""
        base = self[name]
        variant = replace(base, name=f"{name}@{dependency}.{dependency_field}",
                          dependency=dependency, dependency_field=dependency_field)
        if variant.name in self._funcs:
            return self._funcs[variant.name]
        return self.register(variant)

    def __getitem__(self, name: str) -> EnrichFunc:
        try:
            return self._funcs[name]
        except KeyError:
            raise RegistryError(f"unknown enrich function {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._funcs

    def names(self) -> list[str]:
        return list(self._funcs)

    def chain(self, name: str) -> list[EnrichFunc]:
        """``name`` and its ancestors, root first."""
        out = []
        func: EnrichFunc | None = self[name]
        while func is not None:
            out.append(func)
            func = self._funcs[func.dependency] if func.dependency else None
        return out[::-1]

    def result_root(self, name: str) -> str:
        """Tree path under which ``name`` stores its result fields."""
        func = self[name]
        if func.dependency is None:
            return ""
        return join_path(self.result_root(func.dependency), func.dependency_field)

    def result_paths(self, name: str) -> list[str]:
        root = self.result_root(name)
        return [join_path(root, f) for f in self[name].result_fields]

    def copy(self) -> "Registry":
        return Registry(self._funcs.values())


def _error_path(name: str) -> str:
    return f"{ERROR_ROOT}.{_error_key(name)}"


def _error_key(name: str) -> str:
    key = re.sub(r"[^A-Za-z0-9_-]", "_", name)
    return key if key[:1].isalpha() else f"f{key}"


def _annotate(record: EnrichedRecord, name: str, message: str) -> EnrichedRecord:
    path = _error_path(name)
    return record.set(path, message).mark(path).with_applied(name)


def failed(record: EnrichedRecord, name: str) -> bool:
    return record.node(_error_path(name)) is not None


def apply_enrichment(record: EnrichedRecord, func: EnrichFunc | str,
                     registry: Registry, fetch: Fetcher | None,
                     *, explicit: bool = True) -> EnrichedRecord:
    """Apply ``func`` (and, implicitly, its dependencies) to ``record``.

    Already-applied functions are not recomputed; an explicit application of
    a memoised function only adds its output marks.  Failures are recorded
    under ``error.<name>`` and the record is kept.
    """
    if isinstance(func, str):
        func = registry[func]
    if func.name in record.applied:
        if explicit and not failed(record, func.name):
            record = record.mark(*_present(record, registry.result_paths(func.name)))
        return record

    if func.dependency is not None:
        record = apply_enrichment(record, func.dependency, registry, fetch,
                                  explicit=False)
        if failed(record, func.dependency):
            return _annotate(record, func.name,
                             f"dependency {func.dependency!r} failed")
        root = registry.result_root(func.name)
        value = get_path(record, root)
        if value is None:
            return _annotate(record, func.name, f"no input value at {root!r}")
    else:
        root = ""
        if fetch is None:
            return _annotate(record, func.name, "no archive access available")
        try:
            value = fetch(record.meta)
        except (ArchiveError, OSError) as exc:
            return _annotate(record, func.name, f"{type(exc).__name__}: {exc}")

    try:
        result = func.body(value, record)
        if not isinstance(result, Mapping):
            raise EnrichmentError(f"{func.name} body did not return a mapping")
        extra = set(result) - set(func.result_fields)
        if extra:
            raise EnrichmentError(
                f"{func.name} returned undeclared fields {sorted(extra)}")
    except Exception as exc:  # bodies may be third-party code
        return _annotate(record, func.name, f"{type(exc).__name__}: {exc}")

    placed = []
    for key in func.result_fields:
        if key in result and result[key] is not None:
            path = join_path(root, key)
            record = record.set(path, result[key])
            placed.append(path)
    record = record.with_applied(func.name)
    if explicit:
        record = record.mark(*placed)
    return record


def _present(record: EnrichedRecord, paths: list[str]) -> list[str]:
    return [p for p in paths if record.node(p) is not None
            and record.node(p).has_value]


def map_enrich_name(spec: MapEnrich, registry: Registry | None = None) -> str:
    return f"map:{spec.result_key}({resolve_map_input(spec, registry)})"


def resolve_map_input(spec: MapEnrich, registry: Registry | None) -> str:
    if spec.dependency is None:
        return spec.input_path
    if registry is None:
        raise RegistryError("a registry is needed to resolve the dependency")
    return join_path(registry.result_root(spec.dependency), spec.input_path)


def map_enrich(record: EnrichedRecord, spec: MapEnrich,
               registry: Registry | None = None,
               fetch: Fetcher | None = None) -> EnrichedRecord:
    """Store ``spec.body(value)`` under ``<input_path>.<result_key>``."""
    input_path = resolve_map_input(spec, registry)
    name = map_enrich_name(spec, registry)
    result_path = join_path(input_path, spec.result_key)
    if name in record.applied:
        if not failed(record, name):
            record = record.mark(result_path)
        return record
    if spec.dependency is not None:
        record = apply_enrichment(record, spec.dependency, registry, fetch,
                                  explicit=False)
        if failed(record, spec.dependency):
            return _annotate(record, name, f"dependency {spec.dependency!r} failed")
    value = get_path(record, input_path)
    if value is None:
        return _annotate(record, name, f"no input value at {input_path!r}")
    try:
        result = spec.body(value)
        if isinstance(result, Mapping):
            raise EnrichmentError("map enrichment bodies return one value, not a mapping")
    except Exception as exc:
        return _annotate(record, name, f"{type(exc).__name__}: {exc}")
    if result is None:
        return record.with_applied(name)
    return record.set(result_path, result).mark(result_path).with_applied(name)


# -- built-in functions ----------------------------------------------------

def _response_body(warc: WarcRecord, record: EnrichedRecord) -> dict[str, Any]:
    if warc.payload.startswith(b"HTTP/"):
        http = parse_http_response(warc.payload)
        return {"recordHeader": warc.headers, "httpHeader": http.headers,
                "payload": http.body}
    return {"recordHeader": warc.headers, "payload": warc.payload}


_CHARSET = re.compile(r"""charset\s*=\s*["']?([^\s;"']+)""", re.I)


def decode_body(body: bytes, headers: Headers | None) -> str:
    """Undo gzip/deflate content coding, then decode using the declared charset."""
    headers = headers or Headers()
    coding = (headers.get("Content-Encoding") or "").strip().lower()
    if coding in ("gzip", "x-gzip"):
        try:
            body = zlib.decompress(body, wbits=47)
        except zlib.error as exc:
            raise EnrichmentError(f"cannot gunzip body: {exc}") from None
    elif coding == "deflate":
        try:
            body = zlib.decompress(body)
        except zlib.error:
            try:
                body = zlib.decompress(body, wbits=-15)
            except zlib.error as exc:
                raise EnrichmentError(f"cannot inflate body: {exc}") from None
    charset = "utf-8"
    m = _CHARSET.search(headers.get("Content-Type") or "")
    if m:
        try:
            charset = codecs.lookup(m.group(1)).name
        except LookupError:
            pass
    return body.decode(charset, errors="replace")


def _string_body(payload: bytes, record: EnrichedRecord) -> dict[str, Any]:
    headers = get_path(record, "httpHeader")
    return {"string": decode_body(payload, headers if isinstance(headers, Headers) else None)}


_TITLE = re.compile(r"<title\b[^>]*>(.*?)</title\s*>", re.I | re.S)


def extract_title(text: str) -> str | None:
    m = _TITLE.search(text)
    if m is None:
        return None
    return " ".join(html.unescape(m.group(1)).split())


def _title_body(text: str, record: EnrichedRecord) -> dict[str, Any]:
    title = extract_title(text)
    return {} if title is None else {"html.title": title}


RESPONSE = EnrichFunc("response", None, None,
                      ("recordHeader", "httpHeader", "payload"), _response_body)
STRING_CONTENT = EnrichFunc("string", "response", "payload", ("string",), _string_body)
HTML_TITLE = EnrichFunc("html-title", "string", "string", ("html.title",), _title_body)

BUILTINS = (RESPONSE, STRING_CONTENT, HTML_TITLE)


def default_registry() -> Registry:
    return Registry(BUILTINS)


def string_length(value: str) -> int:
    return len(value)


MAP_BODIES: dict[str, Callable[[Any], Any]] = {"length": string_length}
_MAP_SPEC = re.compile(r"^map:([A-Za-z][A-Za-z0-9_-]*)\(([^()]+)\)$")


def parse_enrichment(text: str, registry: Registry) -> EnrichFunc | MapEnrich:
    """Resolve a command-line enrichment name such as ``string`` or
    ``map:length(payload.string)``."""
    text = text.strip()
    m = _MAP_SPEC.match(text)
    if m:
        key, path = m.groups()
        if key not in MAP_BODIES:
            raise RegistryError(f"unknown map enrichment {key!r}")
        return MapEnrich(path.strip(), key, MAP_BODIES[key])
    return registry[text]
