"""Filter expressions: ``<lhs> <op> <rhs>`` terms joined by ``&&``.

>>> expr = parse_filter('status == 200 && mime == "text/html"')
>>> [str(c) for c in expr.conditions]
['status == 200', 'mime == "text/html"']

Metadata names (url, surt, domain, mime, status, timestamp, digest) are
evaluated on CDX rows; ``path(<dot.path>)`` reads a derived field.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any
from urllib.parse import urlsplit

from .cdx import CdxRecord
from .errors import FilterSyntaxError
from .warc import Headers

META_FIELDS = ("url", "surt", "domain", "mime", "status", "timestamp", "digest")
OPERATORS = ("==", "!=", "<", "<=", ">", ">=", "contains", "prefix")

_TOKEN = re.compile(r'\s*(?:("(?:[^"\\]|\\.)*")|(&&)|(==|!=|<=|>=|<|>)|([^\s"=!<>&]+))')
_PATH_LHS = re.compile(r"^path\(([^()]+)\)$")


def _domain(url: str) -> str:
    try:
        return (urlsplit(url).hostname or "").lower()
    except ValueError:
        return ""


META_GETTERS = {
    "url": lambda r: r.original_url,
    "surt": lambda r: r.surt_url,
    "domain": lambda r: _domain(r.original_url),
    "mime": lambda r: r.mime,
    "status": lambda r: r.status,
    "timestamp": lambda r: r.timestamp,
    "digest": lambda r: r.digest,
}


def compare(value: Any, op: str, rhs: Any) -> bool:
    """Apply ``op``; a missing value only satisfies ``!=``."""
    if value is None:
        return op == "!="
    if isinstance(value, Headers):
        value = value.to_dict()
    if op == "contains":
        if isinstance(value, (bytes, bytearray)):
            return str(rhs).encode("utf-8") in value
        if isinstance(value, str):
            return str(rhs) in value
        if isinstance(value, (dict, list, tuple, set, frozenset)):
            return rhs in value
        return False
    if op == "prefix":
        if isinstance(value, (bytes, bytearray)):
            return bytes(value).startswith(str(rhs).encode("utf-8"))
        return isinstance(value, str) and value.startswith(str(rhs))
    if isinstance(value, bool) or isinstance(rhs, bool):
        value, rhs = str(value), str(rhs)
    elif isinstance(value, (int, float)) and isinstance(rhs, str):
        try:
            rhs = float(rhs)
        except ValueError:
            return op == "!="
    elif isinstance(value, str) and isinstance(rhs, (int, float)):
        rhs = str(rhs)
    elif not isinstance(value, (int, float, str)):
        return op == "!=" if op in ("==", "!=") else False
    if op == "==":
        return value == rhs
    if op == "!=":
        return value != rhs
    if op == "<":
        return value < rhs
    if op == "<=":
        return value <= rhs
    if op == ">":
        return value > rhs
    if op == ">=":
        return value >= rhs
    raise FilterSyntaxError(f"unknown operator {op!r}")


@dataclass(frozen=True)
class Condition:
    lhs: str
    op: str
    rhs: Any
    path: str | None = None

    @property
    def is_metadata(self) -> bool:
        return self.path is None

    def __call__(self, subject: Any) -> bool:
        """Evaluate on a CDX row (metadata terms) or on a derived value."""
        if self.path is None:
            if self.lhs == "timestamp":
                return compare(subject.timestamp, self.op, str(self.rhs))
            return compare(META_GETTERS[self.lhs](subject), self.op, self.rhs)
        return compare(subject, self.op, self.rhs)

    def __str__(self) -> str:
        rhs = json.dumps(self.rhs) if isinstance(self.rhs, str) else str(self.rhs)
        return f"{self.lhs} {self.op} {rhs}"


@dataclass(frozen=True)
class FilterExpr:
    """Conjunction of metadata conditions, callable on a :class:`CdxRecord`."""

    conditions: tuple[Condition, ...]

    def __call__(self, record: CdxRecord) -> bool:
        return all(c(record) for c in self.conditions)

    def __str__(self) -> str:
        return " && ".join(str(c) for c in self.conditions)


def _literal(token: tuple[str, ...]) -> Any:
    quoted, _, _, bare = token
    if quoted:
        return json.loads(quoted)
    if re.fullmatch(r"-?\d+", bare):
        return int(bare)
    if re.fullmatch(r"-?\d+\.\d*", bare):
        return float(bare)
    return bare


def parse_literal(text: str) -> Any:
    """Literal from a single command-line word: quoted string, number or bare word."""
    try:
        tokens = tokenize(text)
    except FilterSyntaxError:
        return text
    if len(tokens) == 1 and not tokens[0][1] and not tokens[0][2]:
        return _literal(tokens[0])
    return text


def tokenize(text: str) -> list[tuple[str, str, str, str]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FilterSyntaxError(f"cannot tokenize filter at {text[pos:]!r}")
        tokens.append(tuple(g or "" for g in m.groups()))
        pos = m.end()
    return tokens


def parse_condition(lhs: str, op: str, rhs: Any) -> Condition:
    m = _PATH_LHS.match(lhs)
    path = m.group(1).strip() if m else None
    if path is None and lhs not in META_FIELDS:
        raise FilterSyntaxError(
            f"unknown field {lhs!r}; expected one of {', '.join(META_FIELDS)} or path(...)")
    if op not in OPERATORS:
        raise FilterSyntaxError(f"unknown operator {op!r}")
    if op in ("contains", "prefix") and not isinstance(rhs, str):
        rhs = str(rhs)
    if lhs == "status" and op not in ("contains", "prefix") and not isinstance(rhs, int):
        raise FilterSyntaxError(f"status compares against an integer, got {rhs!r}")
    return Condition(lhs, op, rhs, path)


def parse_filter(text: str) -> FilterExpr:
    tokens = tokenize(text)
    if not tokens:
        raise FilterSyntaxError("empty filter expression")
    conditions = []
    i = 0
    while True:
        if i + 3 > len(tokens):
            raise FilterSyntaxError(f"incomplete condition in {text!r}")
        lhs_tok, op_tok, rhs_tok = tokens[i:i + 3]
        lhs = lhs_tok[3]
        op = op_tok[2] or op_tok[3]
        if not lhs or not op or rhs_tok[1]:
            raise FilterSyntaxError(f"expected '<field> <op> <value>' in {text!r}")
        conditions.append(parse_condition(lhs, op, _literal(rhs_tok)))
        i += 3
        if i == len(tokens):
            break
        if tokens[i][1] != "&&":
            raise FilterSyntaxError(f"expected '&&' in {text!r}")
        i += 1
    return FilterExpr(tuple(conditions))
