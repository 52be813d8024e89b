"""Deterministic synthetic web archives with a ground-truth ledger.

The generator writes record-per-member WARC (or ARC) files with synthetic
HTML pages, error pages and a few non-HTML resources, and a CSV ledger that
lists per capture what the archive is known to contain.  Every oracle in the
test suite is checked against that ledger.
"""

from __future__ import annotations

import csv
import gzip
import os
import random
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from email.utils import format_datetime

from .cdx import CdxRecord, payload_digest, sort_key, write_cdx, cdx_record_from_warc
from .errors import ArchiveError
from .warc import (
    CountingFile,
    compact_to_warc_date,
    encode_chunked,
    make_warc_record,
    scan_records,
    write_member,
    write_warc_record_gz,
)

LEDGER_COLUMNS = ("url", "timestamp", "status", "mime", "title", "terms", "digest")
MARKER_TERMS = ("internet", "election", "occupy", "protest", "sentiment")
CDX_NAME = "index.cdx"
LEDGER_NAME = "ledger.csv"

_SYLLABLES = ("ba", "do", "fe", "gu", "ka", "lo", "mi", "nu", "pa", "ro",
              "sa", "ti", "vo", "za", "qu", "bre", "cla", "dri", "flo", "gra",
              "ple", "sku", "tro", "wex", "yal")
_ACCENTED = ("café", "résumé", "naïve", "déjà", "über")
_TLDS = ("net", "org", "com", "info")


@dataclass(frozen=True)
class CorpusSpec:
    domains: int = 10
    urls_per_domain: int = 20
    captures_per_url: int = 5
    period: tuple[str, str] = ("20111203000000", "20121009235959")
    seed: int = 42
    chunked_fraction: float = 0.2
    gzip_body_fraction: float = 0.2
    non_html_fraction: float = 0.1
    error_status_fraction: float = 0.1
    latin1_fraction: float = 0.1
    needle: str = "internet"
    needle_fraction: float = 0.3
    body_min: int = 1024
    body_max: int = 50 * 1024
    files: int = 4
    format: str = "warc"

    def __post_init__(self):
        for name in ("domains", "urls_per_domain", "captures_per_url", "files"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("chunked_fraction", "gzip_body_fraction", "non_html_fraction",
                     "error_status_fraction", "latin1_fraction", "needle_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 < self.body_min <= self.body_max:
            raise ValueError("need 0 < body_min <= body_max")
        if self.format not in ("warc", "arc"):
            raise ValueError("format is 'warc' or 'arc'")
        start, end = (_parse_ts(t) for t in self.period)
        span = int((end - start).total_seconds()) + 1
        if span < self.captures_per_url:
            raise ValueError("period is too short for distinct capture times")

    @property
    def record_count(self) -> int:
        return self.domains * self.urls_per_domain * self.captures_per_url


@dataclass(frozen=True)
class Capture:
    """One synthetic capture, with the plain text kept for comparisons."""

    url: str
    timestamp: str
    status: int
    mime: str
    title: str
    terms: tuple[str, ...]
    text: str
    charset: str
    chunked: bool
    gzipped: bool
    body: bytes  # entity body as sent (content-coded, not chunked)
    http_message: bytes
    ip: str
    record_id: str

    @property
    def digest(self) -> str:
        return payload_digest(self.body)

    def ledger_row(self) -> dict[str, str]:
        return {
            "url": self.url,
            "timestamp": self.timestamp,
            "status": str(self.status),
            "mime": self.mime,
            "title": self.title,
            "terms": ";".join(self.terms),
            "digest": self.digest,
        }


def _parse_ts(ts: str) -> datetime:
    return datetime.strptime(ts, "%Y%m%d%H%M%S").replace(tzinfo=timezone.utc)


def _vocabulary(rng: random.Random, size: int = 400) -> list[str]:
    words = set()
    while len(words) < size:
        w = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 4)))
        if not any(m in w for m in MARKER_TERMS):
            words.add(w)
    return sorted(words)


def _words(rng: random.Random, vocab: list[str], n: int) -> list[str]:
    return [rng.choice(vocab) for _ in range(n)]


def _html_page(rng, vocab, title, terms, size, accented) -> str:
    paragraphs = []
    length = 0
    pool = list(terms)
    while length < size:
        words = _words(rng, vocab, rng.randint(20, 60))
        if pool:
            words.insert(rng.randrange(len(words) + 1), pool.pop())
        if accented and rng.random() < 0.3:
            words.insert(rng.randrange(len(words) + 1), rng.choice(_ACCENTED))
        p = "<p>" + " ".join(words) + "</p>\n"
        paragraphs.append(p)
        length += len(p)
    return ("<!DOCTYPE html>\n<html>\n<head>\n<meta name=\"generator\" content=\"corpusgen\">\n"
            f"<title>{title}</title>\n</head>\n<body>\n<h1>{title}</h1>\n"
            + "".join(paragraphs) + "</body>\n</html>\n")


def _http_message(status: int, reason: str, date: datetime, headers: list[tuple[str, str]],
                  body: bytes, chunk_sizes: list[int] | None) -> bytes:
    lines = [f"HTTP/1.1 {status} {reason}", f"Date: {format_datetime(date, usegmt=True)}",
             "Server: corpusgen/1.0"]
    lines += [f"{k}: {v}" for k, v in headers]
    if chunk_sizes is not None:
        lines.append("Transfer-Encoding: chunked")
        wire = encode_chunked(body, chunk_sizes)
    else:
        lines.append(f"Content-Length: {len(body)}")
        wire = body
    lines.append("Connection: close")
    return ("\r\n".join(lines) + "\r\n\r\n").encode("latin-1") + wire


_REASONS = {200: "OK", 404: "Not Found", 500: "Internal Server Error"}


def generate_captures(spec: CorpusSpec) -> list[Capture]:
    """All captures in crawl (chronological) order; pure function of ``spec``."""
    rng = random.Random(spec.seed)
    vocab = _vocabulary(rng)
    start = _parse_ts(spec.period[0])
    span = int((_parse_ts(spec.period[1]) - start).total_seconds()) + 1

    urls = []
    used_hosts = set()
    for d in range(spec.domains):
        while True:
            host = f"{rng.choice(vocab)}{d}.{rng.choice(_TLDS)}"
            if host not in used_hosts:
                used_hosts.add(host)
                break
        paths = set()
        while len(paths) < spec.urls_per_domain:
            kind = rng.random()
            if kind < 0.5:
                path = f"/reports/view/{rng.randint(1, 9999)}/"
            elif kind < 0.8:
                path = f"/{rng.choice(vocab)}/{rng.choice(vocab)}.html"
            else:
                path = f"/page?id={rng.randint(1, 999)}"
            paths.add(path)
        urls += [f"http://{host}{p}" for p in sorted(paths)]

    captures = []
    for url in urls:
        offsets = rng.sample(range(span), spec.captures_per_url)
        for off in offsets:
            captures.append((start + timedelta(seconds=off), url))
    captures.sort()

    out = []
    for date, url in captures:
        out.append(_make_capture(rng, spec, vocab, url, date))
    return out


def _make_capture(rng, spec, vocab, url, date) -> Capture:
    ts = date.strftime("%Y%m%d%H%M%S")
    roll = rng.random()
    terms: tuple[str, ...] = ()
    title = ""
    charset = "utf-8"
    if roll < spec.error_status_fraction:
        status = rng.choice((404, 500))
        mime = "text/html"
        title = f"{status} {_REASONS[status]}"
        text = (f"<html><head><title>{title}</title></head>"
                f"<body><h1>{title}</h1><p>{' '.join(_words(rng, vocab, 12))}</p></body></html>\n")
    elif roll < spec.error_status_fraction + spec.non_html_fraction:
        status = 200
        mime = rng.choice(("text/plain", "application/json", "image/png"))
        if mime == "image/png":
            text = ""
        elif mime == "text/plain":
            text = " ".join(_words(rng, vocab, rng.randint(50, 400))) + "\n"
        else:
            text = '{"items": [' + ", ".join(
                f'"{w}"' for w in _words(rng, vocab, rng.randint(10, 100))) + "]}\n"
    else:
        status = 200
        mime = "text/html"
        title = " ".join(w.capitalize() for w in _words(rng, vocab, rng.randint(2, 5)))
        chosen = [m for m in MARKER_TERMS[1:] if rng.random() < 0.25]
        if spec.needle and rng.random() < spec.needle_fraction:
            chosen.insert(0, spec.needle)
        terms = tuple(chosen)
        accented = rng.random() < spec.latin1_fraction
        if accented:
            charset = "iso-8859-1"
        size = rng.randint(spec.body_min, spec.body_max)
        text = _html_page(rng, vocab, title, terms, size, accented)

    if mime == "image/png":
        body = b"\x89PNG\r\n\x1a\n" + rng.randbytes(rng.randint(spec.body_min, spec.body_max))
    else:
        body = text.encode(charset)
    headers = [("Content-Type", f"{mime}; charset={charset}" if mime.startswith("text/") else mime)]
    gzipped = mime != "image/png" and rng.random() < spec.gzip_body_fraction
    if gzipped:
        body = gzip.compress(body, mtime=0)
        headers.append(("Content-Encoding", "gzip"))
    chunk_sizes = None
    if rng.random() < spec.chunked_fraction:
        chunk_sizes = [rng.randint(256, 8192) for _ in range(4)]
    message = _http_message(status, _REASONS[status], date, headers, body, chunk_sizes)
    ip = f"10.{rng.randint(0, 255)}.{rng.randint(0, 255)}.{rng.randint(1, 254)}"
    record_id = f"<urn:uuid:{uuid.UUID(int=rng.getrandbits(128), version=4)}>"
    return Capture(url, ts, status, mime, title, terms, text, charset,
                   chunk_sizes is not None, gzipped, body, message, ip, record_id)


def _file_groups(captures: list[Capture], files: int) -> list[list[Capture]]:
    n = min(files, len(captures))
    size, extra = divmod(len(captures), n)
    groups, start = [], 0
    for i in range(n):
        end = start + size + (1 if i < extra else 0)
        groups.append(captures[start:end])
        start = end
    return groups


def _warc_file(path: str, name: str, captures: list[Capture], created: str) -> None:
    with open(path, "wb") as fh:
        info = (f"software: warcorpus corpusgen\r\nformat: WARC File Format 1.0\r\n"
                f"filename: {name}\r\n").encode("utf-8")
        write_warc_record_gz(fh, make_warc_record([
            ("WARC-Type", "warcinfo"),
            ("WARC-Record-ID", f"<urn:uuid:{uuid.uuid5(uuid.NAMESPACE_URL, name)}>"),
            ("WARC-Date", compact_to_warc_date(created)),
            ("WARC-Filename", name),
            ("Content-Type", "application/warc-fields"),
        ], info), name)
        for c in captures:
            write_warc_record_gz(fh, make_warc_record([
                ("WARC-Type", "response"),
                ("WARC-Record-ID", c.record_id),
                ("WARC-Date", compact_to_warc_date(c.timestamp)),
                ("WARC-Target-URI", c.url),
                ("WARC-IP-Address", c.ip),
                ("WARC-Payload-Digest", f"sha1:{c.digest}"),
                ("Content-Type", "application/http; msgtype=response"),
            ], c.http_message), name)


def _arc_file(path: str, name: str, captures: list[Capture], created: str) -> None:
    with open(path, "wb") as fh:
        version = b"1 0 corpusgen\nURL IP-address Archive-date Content-type Archive-length\n"
        head = f"filedesc://{name} 0.0.0.0 {created} text/plain {len(version)}\n".encode()
        write_member(fh, head + version + b"\n", name)
        for c in captures:
            line = f"{c.url} {c.ip} {c.timestamp} {c.mime} {len(c.http_message)}\n"
            write_member(fh, line.encode("latin-1") + c.http_message + b"\n", name)


def generate_corpus(spec: CorpusSpec, out_dir: str | os.PathLike,
                    write_index: bool = True) -> list[Capture]:
    """Write archives and ``ledger.csv`` (plus ``index.cdx``) into ``out_dir``."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    captures = generate_captures(spec)
    suffix = ".warc.gz" if spec.format == "warc" else ".arc.gz"
    writer = _warc_file if spec.format == "warc" else _arc_file
    paths = []
    for i, group in enumerate(_file_groups(captures, spec.files)):
        name = f"corpus-{i:05d}{suffix}"
        path = os.path.join(out_dir, name)
        writer(path, name, group, group[0].timestamp)
        paths.append(path)
    with open(os.path.join(out_dir, LEDGER_NAME), "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=LEDGER_COLUMNS, lineterminator="\n")
        w.writeheader()
        for c in captures:
            w.writerow(c.ledger_row())
    if write_index:
        cdx_from_warc(paths, os.path.join(out_dir, CDX_NAME))
    return captures


def read_ledger(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _index_file(path: str) -> list[CdxRecord]:
    name = os.path.basename(path)
    rows = []
    with CountingFile.open(path) as fh:
        try:
            for locator, record in scan_records(fh, name):
                if record.record_type in ("response", "resource"):
                    rows.append(cdx_record_from_warc(record, locator))
        except ArchiveError as exc:
            exc.args = (f"{name}: {exc}",)
            raise
    return rows


def cdx_from_warc(warc_paths, out_path: str | os.PathLike | None = None,
                  workers: int | None = None) -> list[CdxRecord]:
    """Index archives: one sorted 11-field CDX row per response record."""
    paths = [os.fspath(p) for p in warc_paths]
    with ThreadPoolExecutor(max_workers=workers or os.cpu_count() or 1) as pool:
        per_file = list(pool.map(_index_file, paths))
    rows = sorted((r for rows in per_file for r in rows), key=sort_key)
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            write_cdx(rows, fh)
    return rows
