"""Shared builders for tests: constructed records and counting fetchers."""

from __future__ import annotations

from warcorpus.cdx import parse_cdx_line
from warcorpus.warc import make_warc_record

EXAMPLE_LINE = ("com,example)/jcdl 20160117113253 http://example.com/jcdl text/html 200 "
                "RKMS6XLYED4G8POFQUIN37WDEWYLD9Z - - 12345 67890 archive.warc.gz")

PAGE = "<html><head><title>JCDL &amp; friends</title></head><body>café</body></html>"


def example_meta():
    return parse_cdx_line(EXAMPLE_LINE)


def http_message(body: bytes, headers=(("Content-Type", "text/html; charset=utf-8"),),
                 status="200 OK") -> bytes:
    head = f"HTTP/1.1 {status}\r\n" + "".join(f"{k}: {v}\r\n" for k, v in headers)
    return head.encode("latin-1") + b"\r\n" + body


def warc_response(url="http://example.com/jcdl", body=PAGE.encode("utf-8"), **kw):
    return make_warc_record([
        ("WARC-Type", "response"),
        ("WARC-Target-URI", url),
        ("WARC-Date", "2016-01-17T11:32:53Z"),
        ("Content-Type", "application/http; msgtype=response"),
    ], http_message(body, **kw))


class CountingFetcher:
    """Serves one fixed archived record and counts how often it is asked."""

    def __init__(self, warc=None):
        self.warc = warc if warc is not None else warc_response()
        self.calls = 0

    def __call__(self, meta):
        self.calls += 1
        return self.warc
