import gzip
import hashlib
import os
import zlib
from dataclasses import replace

import pytest

from conftest import SMALL_SPEC
from warcorpus.cdx import read_cdx, surt_from_url
from warcorpus.corpusgen import (
    MARKER_TERMS,
    CorpusSpec,
    cdx_from_warc,
    generate_captures,
    generate_corpus,
    read_ledger,
)
from warcorpus.enrich import decode_body
from warcorpus.errors import ArchiveError
from warcorpus.filters import parse_filter
from warcorpus.pipeline import open_archive
from warcorpus.warc import Headers, parse_http_response


def tree_digest(directory):
    h = hashlib.sha256()
    for name in sorted(os.listdir(directory)):
        h.update(name.encode())
        h.update((directory / name).read_bytes())
    return h.hexdigest()


def test_cardinality(default_corpus):
    out, captures = default_corpus
    assert len(captures) == 1000
    assert len(read_ledger(out / "ledger.csv")) == 1000
    assert len(read_cdx(out / "index.cdx")) == 1000
    assert len({c.url for c in captures}) == 200
    assert len({surt_from_url(c.url).split(")")[0] for c in captures}) == 10
    assert sorted(n for n in os.listdir(out) if n.endswith(".warc.gz")) == [
        f"corpus-0000{i}.warc.gz" for i in range(4)]


def test_timestamps_within_period(default_corpus):
    _, captures = default_corpus
    lo, hi = CorpusSpec().period
    assert all(lo <= c.timestamp <= hi for c in captures)
    assert [c.timestamp for c in captures] == sorted(c.timestamp for c in captures)
    per_url = {}
    for c in captures:
        per_url.setdefault(c.url, set()).add(c.timestamp)
    assert all(len(v) == 5 for v in per_url.values())


def test_byte_identical_for_same_seed(tmp_path):
    generate_corpus(SMALL_SPEC, tmp_path / "a")
    generate_corpus(SMALL_SPEC, tmp_path / "b")
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")


def test_different_seed_differs():
    a = generate_captures(SMALL_SPEC)
    b = generate_captures(replace(SMALL_SPEC, seed=SMALL_SPEC.seed + 1))
    assert [c.body for c in a] != [c.body for c in b]


def test_ledger_digests_match_scan(small_corpus):
    out, _ = small_corpus
    ledger = {(r["url"], r["timestamp"]): r for r in read_ledger(out / "ledger.csv")}
    records, _ = open_archive(out / "index.cdx", out).execute("scan")
    assert len(records) == len(ledger)
    for r in records:
        assert ledger[(r.meta.original_url, r.meta.timestamp)]["digest"] == r.meta.digest


def test_ledger_cdx_bijection(small_corpus):
    out, _ = small_corpus
    ledger = [(r["url"], r["timestamp"], r["digest"], r["mime"], int(r["status"]))
              for r in read_ledger(out / "ledger.csv")]
    cdx = [(r.original_url, r.timestamp, r.digest, r.mime, r.status)
           for r in read_cdx(out / "index.cdx")]
    assert sorted(ledger) == sorted(cdx)
    assert len(set(cdx)) == len(cdx)


def test_decoded_text_matches_source(small_corpus):
    _, captures = small_corpus
    for c in captures:
        if c.mime == "image/png":
            continue
        http = parse_http_response(c.http_message)
        assert decode_body(http.body, http.headers) == c.text


def test_titles_match_ledger(small_corpus):
    out, _ = small_corpus
    ledger = {(r["url"], r["timestamp"]): r["title"] for r in read_ledger(out / "ledger.csv")}
    plan = open_archive(out / "index.cdx", out).filter(parse_filter('mime == "text/html"'))
    records, _ = plan.enrich("html-title").execute()
    assert records
    for r in records:
        expected = ledger[(r.meta.original_url, r.meta.timestamp)]
        assert r.get("payload.string.html.title") == expected


def test_feature_mix_present(default_corpus):
    _, captures = default_corpus
    assert sum(c.chunked for c in captures) > 100
    assert sum(c.gzipped for c in captures) > 100
    assert sum(c.charset == "iso-8859-1" for c in captures) > 20
    assert sum(c.status != 200 for c in captures) > 50
    assert {c.mime for c in captures} >= {"text/html", "text/plain", "image/png"}
    bodies = [len(c.text.encode("utf-8")) for c in captures
              if c.mime == "text/html" and c.status == 200]
    assert min(bodies) >= 1024 and max(bodies) <= 52 * 1024


def test_gzip_bodies_decode_to_source_text():
    spec = replace(SMALL_SPEC, gzip_body_fraction=1.0, chunked_fraction=0.5)
    for c in generate_captures(spec):
        if c.mime == "image/png":
            continue
        assert c.gzipped
        assert zlib.decompress(c.body, wbits=47) == c.text.encode(c.charset)
        http = parse_http_response(c.http_message)
        assert decode_body(http.body, Headers(http.headers.items())) == c.text


def test_needle_terms_match_text(default_corpus):
    _, captures = default_corpus
    for c in captures:
        for term in MARKER_TERMS:
            assert (term in c.terms) == (term in c.text)
    share = sum("internet" in c.terms for c in captures) / len(captures)
    assert 0.15 < share < 0.35


def test_cdx_from_warc_matches_index(small_corpus):
    out, _ = small_corpus
    paths = sorted(out / n for n in os.listdir(out) if n.endswith(".warc.gz"))
    assert cdx_from_warc(paths) == read_cdx(out / "index.cdx")


def test_arc_corpus_indexes_like_warc(tmp_path):
    generate_corpus(SMALL_SPEC, tmp_path / "w")
    generate_corpus(replace(SMALL_SPEC, format="arc"), tmp_path / "a")
    warc = {(r.surt_url, r.timestamp, r.digest, r.mime, r.status)
            for r in read_cdx(tmp_path / "w" / "index.cdx")}
    arc = {(r.surt_url, r.timestamp, r.digest, r.mime, r.status)
           for r in read_cdx(tmp_path / "a" / "index.cdx")}
    assert warc == arc


def test_indexing_error_names_file(tmp_path):
    bad = tmp_path / "bad.warc.gz"
    bad.write_bytes(gzip.compress(b"not a warc record\r\n\r\n"))
    with pytest.raises(ArchiveError) as exc:
        cdx_from_warc([bad])
    assert "bad.warc.gz" in str(exc.value)


@pytest.mark.parametrize("kwargs", [
    {"domains": 0}, {"chunked_fraction": 1.5}, {"body_min": 10, "body_max": 5},
    {"format": "zip"}, {"period": ("20120101000000", "20120101000001"), "captures_per_url": 5},
])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        CorpusSpec(**kwargs)
