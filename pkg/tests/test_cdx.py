import pytest
from hypothesis import given, strategies as st

from warcorpus.cdx import (
    CDX_HEADER,
    CdxRecord,
    is_header_line,
    iter_cdx,
    parse_cdx_line,
    read_cdx,
    surt_from_url,
    timestamp_to_iso,
    warc_date_to_timestamp,
    write_cdx_line,
)
from warcorpus.errors import CdxFormatError, CdxParseError, NineFieldCdxError, SurtError

EXAMPLE_LINE = ("com,example)/jcdl 20160117113253 http://example.com/jcdl text/html 200 "
                "RKMS6XLYED4G8POFQUIN37WDEWYLD9Z - - 12345 67890 archive.warc.gz")


def surt_oracle(url):
    """Hand-applied canonicalisation rules, plain string slicing only."""
    scheme, rest = url.split("://", 1)
    rest = rest.split("#", 1)[0]
    cut = [i for i in (rest.find("/"), rest.find("?")) if i >= 0]
    end = min(cut) if cut else len(rest)
    authority, tail = rest[:end], rest[end:]
    authority = authority.rsplit("@", 1)[-1]
    host, _, port = authority.partition(":")
    labels = host.lower().split(".")
    out = ",".join(labels[::-1])
    default = {"http": "80", "https": "443"}.get(scheme.lower())
    if port and port != default:
        out += ":" + str(int(port))
    if not tail.startswith("/"):
        tail = "/" + tail
    return out + ")" + tail


def test_parse_example_line():
    r = parse_cdx_line(EXAMPLE_LINE)
    assert r.surt_url == "com,example)/jcdl"
    assert r.timestamp == "20160117113253"
    assert r.original_url == "http://example.com/jcdl"
    assert r.mime == "text/html"
    assert r.status == 200
    assert r.digest == "RKMS6XLYED4G8POFQUIN37WDEWYLD9Z"
    assert r.redirect_url is None and r.meta_tags is None
    assert r.compressed_length == 12345
    assert r.offset == 67890
    assert r.filename == "archive.warc.gz"


def test_write_example_record_roundtrip():
    assert write_cdx_line(parse_cdx_line(EXAMPLE_LINE)) == EXAMPLE_LINE
    assert write_cdx_line(parse_cdx_line(EXAMPLE_LINE + "\n")) == EXAMPLE_LINE


def test_field_count_errors():
    fields = EXAMPLE_LINE.split(" ")
    with pytest.raises(CdxFormatError) as exc:
        parse_cdx_line(" ".join(fields[:10]))
    assert exc.value.count == 10
    assert "10" in str(exc.value)
    with pytest.raises(NineFieldCdxError):
        parse_cdx_line(" ".join(fields[:9]))


@pytest.mark.parametrize("index,name", [
    (1, "timestamp"), (4, "status"), (8, "compressed length"), (9, "offset"),
])
def test_non_numeric_fields(index, name):
    fields = EXAMPLE_LINE.split(" ")
    fields[index] = "x12"
    with pytest.raises(CdxParseError) as exc:
        parse_cdx_line(" ".join(fields))
    assert exc.value.field == name


def test_invalid_calendar_timestamp():
    with pytest.raises(CdxParseError):
        parse_cdx_line(EXAMPLE_LINE.replace("20160117113253", "20160230120000"))


def test_zero_length_rejected():
    with pytest.raises(CdxParseError):
        parse_cdx_line(EXAMPLE_LINE.replace(" 12345 ", " 0 "))


def test_absent_status_renders_dash():
    r = parse_cdx_line(EXAMPLE_LINE.replace(" 200 ", " - "))
    assert r.status is None
    assert write_cdx_line(r).split(" ")[4] == "-"


def test_header_lines():
    assert is_header_line(CDX_HEADER)
    assert is_header_line("CDX N b a m s k r M S V g")
    assert is_header_line("N b a m s k r M S V g")
    assert is_header_line("urlkey timestamp original mimetype statuscode digest "
                          "redirect metatags length offset filename")
    assert not is_header_line(EXAMPLE_LINE)
    rows = list(iter_cdx([CDX_HEADER + "\n", EXAMPLE_LINE + "\n", "\n"]))
    assert len(rows) == 1


def test_surt_examples():
    assert surt_from_url("http://example.com/jcdl") == "com,example)/jcdl"
    assert surt_from_url("http://localhost/") == "localhost)/"
    golden = surt_oracle("HTTP://Sub.Example.COM:8080/A/b?q=1")
    assert golden == "com,example,sub:8080)/A/b?q=1"
    assert surt_from_url("HTTP://Sub.Example.COM:8080/A/b?q=1") == golden


def test_surt_rules():
    assert surt_from_url("http://example.com:80/a") == "com,example)/a"
    assert surt_from_url("https://example.com:443/a") == "com,example)/a"
    assert surt_from_url("https://example.com:80/a") == "com,example:80)/a"
    assert surt_from_url("http://www.example.com") == "com,example,www)/"
    assert surt_from_url("http://example.com/p?b=2&a=1#frag") == "com,example)/p?b=2&a=1"
    assert surt_from_url("http://example.com?x=1") == "com,example)/?x=1"


@pytest.mark.parametrize("url", ["example.com/path", "http:///nohost", "http://a.com:xx/"])
def test_surt_errors(url):
    with pytest.raises(SurtError):
        surt_from_url(url)


_label = st.from_regex(r"[a-zA-Z][a-zA-Z0-9-]{0,8}", fullmatch=True)
_path = st.from_regex(r"(/[A-Za-z0-9_.~-]{0,6}){0,3}", fullmatch=True)
_query = st.one_of(st.just(""), st.from_regex(r"\?[a-z]=[0-9]{1,3}(&[a-z]=[A-Z]{1,3})?",
                                               fullmatch=True))


@given(scheme=st.sampled_from(["http", "https", "HTTP"]),
       labels=st.lists(_label, min_size=1, max_size=4),
       port=st.one_of(st.none(), st.sampled_from([80, 443, 8080, 1])),
       path=_path, query=_query)
def test_surt_matches_rule_oracle(scheme, labels, port, path, query):
    url = f"{scheme}://{'.'.join(labels)}" + (f":{port}" if port else "") + path + query
    assert surt_from_url(url) == surt_oracle(url)


def test_timestamp_to_iso():
    assert timestamp_to_iso("20160117113253") == "2016-01-17T11:32:53.000+00:00"
    assert timestamp_to_iso("20111203000000") == "2011-12-03T00:00:00.000+00:00"
    with pytest.raises(CdxParseError):
        timestamp_to_iso("20160230120000")


def test_warc_date_conversion():
    assert warc_date_to_timestamp("2016-01-17T11:32:53Z") == "20160117113253"
    assert warc_date_to_timestamp("2016-01-17T12:32:53+01:00") == "20160117113253"
    assert warc_date_to_timestamp("2016-01-17T11:32:53.250Z") == "20160117113253"


@given(st.builds(
    CdxRecord,
    surt_url=st.from_regex(r"[a-z]{1,5}(,[a-z]{1,5}){0,2}\)/[a-z0-9/]{0,10}", fullmatch=True),
    timestamp=st.datetimes().map(lambda d: d.strftime("%Y%m%d%H%M%S")).filter(
        lambda t: len(t) == 14),
    original_url=st.from_regex(r"http://[a-z]{1,8}\.com/[a-z]{0,5}", fullmatch=True),
    mime=st.sampled_from(["text/html", "image/png", "unk"]),
    status=st.one_of(st.none(), st.integers(100, 599)),
    digest=st.from_regex(r"[A-Z2-7]{32}", fullmatch=True),
    redirect_url=st.one_of(st.none(), st.just("http://x.com/")),
    meta_tags=st.one_of(st.none(), st.just("noindex")),
    compressed_length=st.integers(1, 10**9),
    offset=st.integers(0, 10**12),
    filename=st.from_regex(r"[a-z0-9-]{1,10}\.warc\.gz", fullmatch=True),
))
def test_parse_write_identity(record):
    assert parse_cdx_line(write_cdx_line(record)) == record


def test_generated_cdx_properties(small_corpus):
    out, captures = small_corpus
    path = out / "index.cdx"
    lines = path.read_text(encoding="utf-8").splitlines()
    assert is_header_line(lines[0])
    data = lines[1:]
    assert len(data) == len(captures)
    for line in data:
        assert write_cdx_line(parse_cdx_line(line)) == line
    rows = read_cdx(path)
    for r in rows:
        assert surt_from_url(r.original_url) == r.surt_url
    assert data == sorted(data)
    keys = [(r.surt_url, r.timestamp) for r in rows]
    assert keys == sorted(keys)
