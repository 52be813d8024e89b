"""WARC/ARC record IO over record-per-gzip-member archives.

Every record is stored as its own gzip member, so a ``(offset, length)``
pair taken from a CDX row can be decompressed on its own without touching
the rest of the file.  Archives written as one continuous gzip stream are
rejected by :func:`scan_records`; they have to be re-packed first.
"""

from __future__ import annotations

import gzip
import io
import os
import re
import zlib
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator

from .errors import (
    CorruptRecordError,
    HttpFormatError,
    LocatorError,
    NotMemberAlignedError,
    WarcFormatError,
)

CRLF = b"\r\n"
GZIP_MAGIC = b"\x1f\x8b"
WARC_VERSIONS = ("WARC/1.0", "WARC/1.1")
SCAN_CHUNK = 1 << 20

# read_record_at reads exactly the member; nothing beyond it.
READ_AHEAD = 0


class Headers:
    """Ordered, case-insensitive header list that keeps duplicates."""

    def __init__(self, items: Iterable[tuple[str, str]] = ()):
        self._items = [(str(k), str(v)) for k, v in items]

    def get(self, name: str, default: str | None = None) -> str | None:
        name = name.lower()
        for k, v in self._items:
            if k.lower() == name:
                return v
        return default

    def get_all(self, name: str) -> list[str]:
        name = name.lower()
        return [v for k, v in self._items if k.lower() == name]

    def __getitem__(self, name: str) -> str:
        value = self.get(name)
        if value is None:
            raise KeyError(name)
        return value

    def __contains__(self, name: object) -> bool:
        return isinstance(name, str) and self.get(name) is not None

    def items(self) -> list[tuple[str, str]]:
        return list(self._items)

    def keys(self) -> list[str]:
        return [k for k, _ in self._items]

    def __iter__(self):
        return iter(self.keys())

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Headers):
            return NotImplemented
        return self._items == other._items

    def __repr__(self) -> str:
        return f"Headers({self._items!r})"

    def to_dict(self) -> dict[str, str]:
        """Collapse to a plain dict; repeated names are joined with ``", "``."""
        out: dict[str, str] = {}
        for k, v in self._items:
            out[k] = f"{out[k]}, {v}" if k in out else v
        return out


@dataclass(frozen=True)
class RecordLocator:
    filename: str
    offset: int
    compressed_length: int


@dataclass(frozen=True)
class WarcRecord:
    headers: Headers
    payload: bytes
    version: str = "WARC/1.0"

    @property
    def record_type(self) -> str | None:
        return self.headers.get("WARC-Type")

    @property
    def target_uri(self) -> str | None:
        return self.headers.get("WARC-Target-URI")

    def serialize(self) -> bytes:
        lines = [self.version.encode("ascii")]
        lines += [f"{k}: {v}".encode("utf-8") for k, v in self.headers.items()]
        return CRLF.join(lines) + CRLF + CRLF + self.payload + CRLF + CRLF


@dataclass(frozen=True)
class HttpResponse:
    status: int
    reason: str
    headers: Headers
    body: bytes
    protocol: str = "HTTP/1.1"


def make_warc_record(headers: Iterable[tuple[str, str]], payload: bytes,
                     version: str = "WARC/1.0") -> WarcRecord:
    """Build a record, setting Content-Length from the payload."""
    items = [(k, v) for k, v in headers if k.lower() != "content-length"]
    items.append(("Content-Length", str(len(payload))))
    return WarcRecord(Headers(items), payload, version)


class CountingFile(io.RawIOBase):
    """Read-only wrapper that counts every byte handed out by ``read``."""

    def __init__(self, raw: BinaryIO):
        self._raw = raw
        self.bytes_read = 0

    @classmethod
    def open(cls, path: str | os.PathLike) -> "CountingFile":
        return cls(open(path, "rb", buffering=0))

    @property
    def name(self):
        return getattr(self._raw, "name", None)

    def readable(self) -> bool:
        return True

    def seekable(self) -> bool:
        return True

    def seek(self, offset: int, whence: int = io.SEEK_SET) -> int:
        return self._raw.seek(offset, whence)

    def tell(self) -> int:
        return self._raw.tell()

    def read(self, size: int = -1) -> bytes:
        data = self._raw.read(size)
        if data:
            self.bytes_read += len(data)
        return data

    def readinto(self, b) -> int:
        data = self.read(len(b))
        b[: len(data)] = data
        return len(data)

    def close(self) -> None:
        self._raw.close()
        super().close()


def _read_exact(file: BinaryIO, size: int) -> bytes:
    chunks = []
    remaining = size
    while remaining > 0:
        chunk = file.read(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def write_warc_record_gz(sink: BinaryIO, record: WarcRecord,
                         filename: str | None = None) -> RecordLocator:
    """Append ``record`` to ``sink`` as one standalone gzip member."""
    offset = sink.tell()
    member = gzip.compress(record.serialize(), mtime=0)
    sink.write(member)
    if filename is None:
        filename = os.path.basename(getattr(sink, "name", "") or "")
    return RecordLocator(filename, offset, len(member))


def write_member(sink: BinaryIO, data: bytes, filename: str) -> RecordLocator:
    offset = sink.tell()
    member = gzip.compress(data, mtime=0)
    sink.write(member)
    return RecordLocator(filename, offset, len(member))


# -- parsing ---------------------------------------------------------------

def _parse_header_lines(lines: list[bytes]) -> Headers:
    items = []
    for raw in lines:
        line = raw.decode("latin-1")
        if items and line[:1] in (" ", "\t"):
            name, value = items[-1]
            items[-1] = (name, value + " " + line.strip())
            continue
        name, sep, value = line.partition(":")
        if not sep or not name.strip():
            raise WarcFormatError(f"malformed header line: {line!r}")
        items.append((name.strip(), value.strip()))
    return Headers(items)


def parse_warc_record(data: bytes, *, strict_tail: bool = True) -> tuple[WarcRecord, int]:
    """Parse one WARC record from the start of ``data``.

    Returns the record and the number of bytes it occupied, trailing
    CRLF CRLF included.
    """
    head_end = data.find(CRLF + CRLF)
    if head_end < 0:
        raise WarcFormatError("WARC header block is not terminated")
    lines = data[:head_end].split(CRLF)
    version = lines[0].decode("latin-1").strip()
    if version not in WARC_VERSIONS:
        raise WarcFormatError(f"unsupported WARC version line: {version!r}")
    headers = _parse_header_lines(lines[1:])
    length = headers.get("Content-Length")
    if length is None or not length.strip().isdigit():
        raise WarcFormatError(f"missing or invalid Content-Length: {length!r}")
    length = int(length)
    start = head_end + 4
    payload = data[start:start + length]
    if len(payload) != length:
        raise CorruptRecordError(
            f"record payload truncated: {len(payload)} of {length} bytes")
    end = start + length
    if data[end:end + 4] == CRLF + CRLF:
        end += 4
    elif strict_tail:
        raise WarcFormatError("record is not followed by CRLF CRLF")
    return WarcRecord(headers, payload, version), end


_ARC_DATE = re.compile(rb"^\d{14}$")


def parse_arc_record(block: bytes) -> tuple[WarcRecord, int]:
    """Parse an ARC v1 record and normalise it to the WARC record shape.

    The header line is ``<url> <ip> <14-digit date> <mime> <length>``; the
    next ``length`` bytes are the payload.  Returns the record and the number
    of bytes consumed (including the newline separating records, if any).
    """
    nl = block.find(b"\n")
    if nl < 0:
        raise WarcFormatError("ARC header line is not terminated")
    tokens = block[:nl].rstrip(b"\r").split(b" ")
    if len(tokens) != 5:
        raise WarcFormatError(
            f"ARC header line must have 5 fields, got {len(tokens)}")
    url, ip, date, mime, length = (t.decode("latin-1") for t in tokens)
    if not _ARC_DATE.match(tokens[2]):
        raise WarcFormatError(f"invalid ARC date: {date!r}")
    if not length.isdigit():
        raise WarcFormatError(f"invalid ARC length: {length!r}")
    size = int(length)
    start = nl + 1
    payload = block[start:start + size]
    if len(payload) != size:
        raise CorruptRecordError(
            f"ARC payload truncated: {len(payload)} of {size} bytes")
    end = start + size
    if block[end:end + 1] == b"\n":
        end += 1
    record_type = "warcinfo" if url.startswith("filedesc://") else "response"
    headers = [
        ("WARC-Type", record_type),
        ("WARC-Target-URI", url),
        ("WARC-Date", compact_to_warc_date(date)),
        ("WARC-IP-Address", ip),
        ("Content-Type", mime),
        ("Content-Length", str(size)),
    ]
    return WarcRecord(Headers(headers), payload), end


def parse_member_record(data: bytes) -> tuple[WarcRecord, int]:
    """Parse a decompressed member as WARC, or ARC when it lacks a WARC version line."""
    if data.startswith(b"WARC/"):
        return parse_warc_record(data)
    return parse_arc_record(data)


def compact_to_warc_date(ts: str) -> str:
    return f"{ts[0:4]}-{ts[4:6]}-{ts[6:8]}T{ts[8:10]}:{ts[10:12]}:{ts[12:14]}Z"


def _decompress_member(data: bytes, offset: int | None) -> bytes:
    if not data.startswith(GZIP_MAGIC):
        raise LocatorError(
            f"no gzip member starts at offset {offset}; the locator is misaligned")
    d = zlib.decompressobj(wbits=31)
    try:
        out = d.decompress(data)
    except zlib.error as exc:
        raise CorruptRecordError(f"gzip member is corrupt: {exc}", offset) from exc
    if not d.eof:
        raise CorruptRecordError("gzip member is truncated", offset)
    if d.unused_data:
        raise LocatorError(
            f"locator at offset {offset} spans more than one gzip member")
    return out


def read_record_at(file: BinaryIO, locator: RecordLocator) -> WarcRecord:
    """Decompress and parse the single member addressed by ``locator``."""
    file.seek(locator.offset)
    data = _read_exact(file, locator.compressed_length)
    if len(data) < locator.compressed_length:
        if not data.startswith(GZIP_MAGIC):
            raise LocatorError(f"no gzip member at offset {locator.offset}")
        raise CorruptRecordError("archive ends inside the gzip member", locator.offset)
    raw = _decompress_member(data, locator.offset)
    try:
        record, _ = parse_member_record(raw)
    except CorruptRecordError as exc:
        raise CorruptRecordError(str(exc), locator.offset) from exc
    return record


def scan_records(file: BinaryIO, filename: str | None = None
                 ) -> Iterator[tuple[RecordLocator, WarcRecord]]:
    """Yield every record of a member-aligned archive in file order.

    Reads the file front to back exactly once.  ARC ``filedesc://`` headers
    are skipped.
    """
    if filename is None:
        filename = os.path.basename(getattr(file, "name", "") or "")
    buf = b""
    pos = 0  # file offset of buf[0]
    eof = False

    def fill() -> bool:
        nonlocal buf, eof
        if eof:
            return False
        chunk = file.read(SCAN_CHUNK)
        if not chunk:
            eof = True
            return False
        buf += chunk
        return True

    while True:
        if not buf and not fill():
            return
        while len(buf) < 2 and fill():
            pass
        if not buf.startswith(GZIP_MAGIC):
            raise CorruptRecordError("expected a gzip member", pos)
        d = zlib.decompressobj(wbits=31)
        out = []
        consumed = 0
        view = buf
        while True:
            try:
                out.append(d.decompress(view))
            except zlib.error as exc:
                raise CorruptRecordError(f"gzip member is corrupt: {exc}", pos) from exc
            if d.eof:
                consumed += len(view) - len(d.unused_data)
                break
            consumed += len(view)
            buf = b""
            if not fill():
                raise CorruptRecordError("gzip member is truncated", pos)
            view = buf
        rest = d.unused_data
        raw = b"".join(out)
        try:
            record, used = parse_member_record(raw)
        except CorruptRecordError as exc:
            raise CorruptRecordError(str(exc), pos) from exc
        except WarcFormatError as exc:
            raise WarcFormatError(f"{exc} (at offset {pos})") from exc
        if raw[used:].strip(b"\r\n"):
            raise NotMemberAlignedError(
                f"gzip member at offset {pos} holds more than one record; "
                "re-pack the archive with one record per gzip member")
        if not (record.record_type == "warcinfo"
                and (record.target_uri or "").startswith("filedesc://")):
            yield RecordLocator(filename, pos, consumed), record
        pos += consumed
        buf = rest


# -- HTTP ------------------------------------------------------------------

_STATUS_LINE = re.compile(r"^(HTTP/\d(?:\.\d)?)\s+(\d{3})(?:\s+(.*))?$")


def parse_http_response(payload: bytes) -> HttpResponse:
    """Split an HTTP response into status, headers and body.

    Chunked transfer coding is removed; content coding is left as is.
    """
    line_end = payload.find(CRLF)
    if line_end < 0:
        raise HttpFormatError("missing HTTP status line")
    m = _STATUS_LINE.match(payload[:line_end].decode("latin-1"))
    if not m:
        raise HttpFormatError(
            f"invalid HTTP status line: {payload[:line_end][:80]!r}")
    status = int(m.group(2))
    if not 100 <= status <= 599:
        raise HttpFormatError(f"HTTP status out of range: {status}")
    if payload[line_end:line_end + 4] == CRLF + CRLF:
        head_end = line_end
    else:
        head_end = payload.find(CRLF + CRLF, line_end)
        if head_end < 0:
            raise HttpFormatError("HTTP header block is not terminated")
    try:
        headers = _parse_header_lines(
            payload[line_end + 2:head_end].split(CRLF) if head_end > line_end else [])
    except WarcFormatError as exc:
        raise HttpFormatError(str(exc)) from exc
    body = payload[head_end + 4:]
    te = headers.get("Transfer-Encoding", "")
    if "chunked" in te.lower():
        body = dechunk(body)
    return HttpResponse(status, m.group(3) or "", headers, body, m.group(1))


def dechunk(data: bytes) -> bytes:
    out = []
    pos = 0
    while True:
        line_end = data.find(CRLF, pos)
        if line_end < 0:
            raise HttpFormatError("chunk size line is not terminated")
        size_text = data[pos:line_end].split(b";", 1)[0].strip()
        try:
            size = int(size_text, 16)
        except ValueError:
            raise HttpFormatError(f"invalid chunk size: {size_text!r}") from None
        pos = line_end + 2
        if size == 0:
            return b"".join(out)
        chunk = data[pos:pos + size]
        if len(chunk) != size or data[pos + size:pos + size + 2] != CRLF:
            raise HttpFormatError("chunk is truncated")
        out.append(chunk)
        pos += size + 2


def encode_chunked(body: bytes, sizes: Iterable[int]) -> bytes:
    """Chunk ``body`` using successive chunk ``sizes`` (the last is repeated)."""
    out = []
    pos = 0
    size = 1
    sizes = list(sizes) or [len(body) or 1]
    i = 0
    while pos < len(body):
        size = max(1, sizes[min(i, len(sizes) - 1)])
        chunk = body[pos:pos + size]
        out.append(b"%x\r\n%s\r\n" % (len(chunk), chunk))
        pos += len(chunk)
        i += 1
    out.append(b"0\r\n\r\n")
    return b"".join(out)
