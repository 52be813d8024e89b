"""11-field CDX index lines, SURT canonicalisation and timestamp helpers."""

from __future__ import annotations

import base64
import hashlib
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Iterator, TextIO
from urllib.parse import urlsplit

from .errors import CdxFormatError, CdxParseError, NineFieldCdxError, SurtError
from .warc import RecordLocator, WarcRecord, parse_http_response

CDX_HEADER = " CDX N b a m s k r M S V g"
FIELD_CODES = ("N", "b", "a", "m", "s", "k", "r", "M", "S", "V", "g")
FIELD_NAMES = ("urlkey", "timestamp", "original", "mimetype", "statuscode",
               "digest", "redirect", "metatags", "length", "offset", "filename")

DEFAULT_PORTS = {"http": 80, "https": 443}


@dataclass(frozen=True)
class CdxRecord:
    """Metadata for one capture.  ``None`` stands for a ``-`` field."""

    surt_url: str
    timestamp: str
    original_url: str
    mime: str
    status: int | None
    digest: str
    redirect_url: str | None
    meta_tags: str | None
    compressed_length: int
    offset: int
    filename: str

    @property
    def locator(self) -> RecordLocator:
        return RecordLocator(self.filename, self.offset, self.compressed_length)


def is_header_line(line: str) -> bool:
    tokens = line.split()
    if not tokens:
        return False
    if tokens[0] == "CDX":
        return True
    return tuple(tokens) in (FIELD_CODES, FIELD_NAMES)


def _int_field(name: str, value: str) -> int:
    if not value.isdigit():
        raise CdxParseError(name, value)
    return int(value)


def _check_timestamp(value: str) -> str:
    if len(value) != 14 or not value.isdigit():
        raise CdxParseError("timestamp", value)
    try:
        datetime.strptime(value, "%Y%m%d%H%M%S")
    except ValueError:
        raise CdxParseError("timestamp", value) from None
    return value


def parse_cdx_line(line: str) -> CdxRecord:
    fields = line.rstrip("\r\n").split(" ")
    if len(fields) == 9:
        raise NineFieldCdxError()
    if len(fields) != 11:
        raise CdxFormatError(len(fields))
    surt, ts, url, mime, status, digest, redirect, meta, length, offset, filename = fields
    record = CdxRecord(
        surt_url=surt,
        timestamp=_check_timestamp(ts),
        original_url=url,
        mime=mime,
        status=None if status == "-" else _int_field("status", status),
        digest=digest,
        redirect_url=None if redirect == "-" else redirect,
        meta_tags=None if meta == "-" else meta,
        compressed_length=_int_field("compressed length", length),
        offset=_int_field("offset", offset),
        filename=filename,
    )
    if record.compressed_length <= 0:
        raise CdxParseError("compressed length", length)
    return record


def write_cdx_line(record: CdxRecord) -> str:
    def dash(v):
        return "-" if v is None else str(v)

    return " ".join((
        record.surt_url, record.timestamp, record.original_url, record.mime,
        dash(record.status), record.digest, dash(record.redirect_url),
        dash(record.meta_tags), str(record.compressed_length),
        str(record.offset), record.filename,
    ))


def iter_cdx(lines: Iterable[str]) -> Iterator[CdxRecord]:
    """Parse CDX data lines, skipping a leading header and blank lines."""
    first = True
    for line in lines:
        if first:
            first = False
            if is_header_line(line):
                continue
        if not line.strip():
            continue
        yield parse_cdx_line(line)


def read_cdx(path: str | os.PathLike) -> list[CdxRecord]:
    with open(path, encoding="utf-8", newline="\n") as fh:
        return list(iter_cdx(fh))


def write_cdx(records: Iterable[CdxRecord], out: TextIO, header: bool = True) -> None:
    if header:
        out.write(CDX_HEADER + "\n")
    for record in records:
        out.write(write_cdx_line(record) + "\n")


def surt_from_url(url: str) -> str:
    """Host-reversed, scheme-less form used as the CDX sort key.

    Path and query are kept verbatim, the fragment and default ports are
    dropped, ``www.`` is not stripped.
    """
    try:
        parts = urlsplit(url.strip())
        port = parts.port
    except ValueError as exc:
        raise SurtError(f"cannot canonicalise {url!r}: {exc}") from None
    if not parts.scheme or not parts.hostname:
        raise SurtError(f"cannot canonicalise {url!r}: missing scheme or host")
    scheme = parts.scheme.lower()
    host = ",".join(reversed(parts.hostname.lower().split(".")))
    if port is not None and port != DEFAULT_PORTS.get(scheme):
        host = f"{host}:{port}"
    path = parts.path or "/"
    if parts.query:
        path = f"{path}?{parts.query}"
    return f"{host}){path}"


def timestamp_to_iso(ts: str) -> str:
    dt = datetime.strptime(_check_timestamp(ts), "%Y%m%d%H%M%S")
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + ".000+00:00"


def warc_date_to_timestamp(value: str) -> str:
    """``2016-01-17T11:32:53Z`` (any ISO-8601 form) -> ``20160117113253`` in UTC."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise CdxParseError("timestamp", value) from None
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y%m%d%H%M%S")


def payload_digest(body: bytes) -> str:
    """Base32 SHA-1 as used in CDX digest fields."""
    return base64.b32encode(hashlib.sha1(body).digest()).decode("ascii")


def cdx_record_from_warc(record: WarcRecord, locator: RecordLocator) -> CdxRecord:
    """Derive a capture's CDX row from the archived record itself."""
    url = record.target_uri
    date = record.headers.get("WARC-Date")
    if not url or not date:
        raise CdxParseError("record", f"record at offset {locator.offset} lacks URI or date")
    status = None
    redirect = None
    mime = record.headers.get("Content-Type") or "unk"
    body = record.payload
    if record.payload.startswith(b"HTTP/"):
        http = parse_http_response(record.payload)
        status = http.status
        mime = http.headers.get("Content-Type") or "unk"
        body = http.body
        if 300 <= status < 400:
            redirect = http.headers.get("Location")
    mime = mime.split(";", 1)[0].strip().lower() or "unk"
    return CdxRecord(
        surt_url=surt_from_url(url),
        timestamp=warc_date_to_timestamp(date),
        original_url=url,
        mime=mime,
        status=status,
        digest=payload_digest(body),
        redirect_url=redirect or None,
        meta_tags=None,
        compressed_length=locator.compressed_length,
        offset=locator.offset,
        filename=locator.filename,
    )


def sort_key(record: CdxRecord) -> str:
    return write_cdx_line(record)
