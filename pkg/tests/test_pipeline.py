import os
from dataclasses import replace

import pytest

from warcorpus.cdx import read_cdx, write_cdx
from warcorpus.errors import PlanError
from warcorpus.filters import parse_condition, parse_filter
from warcorpus.jsonout import record_to_json
from warcorpus.pipeline import latest_per_url, open_archive


def plan_for(corpus):
    out, _ = corpus
    return open_archive(out / "index.cdx", out)


def total_archive_bytes(directory):
    return sum(os.path.getsize(directory / n) for n in os.listdir(directory)
               if n.endswith(".warc.gz"))


def brute_force_latest(rows):
    groups = {}
    for i, r in enumerate(rows):
        groups.setdefault(r.surt_url, []).append((r.timestamp, i))
    keep = sorted(max(v)[1] for v in groups.values())
    return [rows[i] for i in keep]


def test_plan_construction_does_no_io(tmp_path):
    plan = (open_archive(tmp_path / "missing.cdx", tmp_path / "nowhere")
            .filter(parse_filter("status == 200"))
            .enrich("string")
            .enrich("map:length(payload.string)")
            .latest_per_url())
    assert len(plan.steps) == 4
    with pytest.raises(FileNotFoundError):
        plan.count()


def test_plans_are_immutable(small_corpus):
    base = plan_for(small_corpus)
    filtered = base.filter(parse_filter("status == 200"))
    assert base.steps == ()
    assert len(filtered.steps) == 1


def test_metadata_only_count_reads_nothing(small_corpus):
    out, captures = small_corpus
    plan = plan_for(small_corpus).filter(parse_filter('mime == "text/html"'))
    records, stats = plan.execute()
    assert len(records) == sum(c.mime == "text/html" for c in captures)
    assert stats.archive_bytes_read == 0 and stats.records_fetched == 0
    assert stats.cdx_lines_read == len(captures)


def test_selective_fetches_only_survivors(small_corpus):
    plan = plan_for(small_corpus).filter(parse_filter("status == 200")).enrich("string")
    records, stats = plan.execute()
    assert stats.records_fetched == len(records)
    rows = read_cdx(small_corpus[0] / "index.cdx")
    assert stats.archive_bytes_read == sum(r.compressed_length for r in rows if r.status == 200)


def test_scan_reads_everything(small_corpus):
    out, _ = small_corpus
    _, stats = plan_for(small_corpus).filter(parse_filter("status == 404")).execute("scan")
    assert stats.archive_bytes_read == total_archive_bytes(out)


@pytest.mark.parametrize("text", [
    'mime == "text/html"',
    "status != 200",
    'url contains "page" && timestamp >= "20120101"',
    'domain prefix "a"',
])
def test_selective_matches_scan(small_corpus, text):
    plan = (plan_for(small_corpus).filter(parse_filter(text))
            .enrich("html-title").enrich("map:length(payload.string)"))
    sel, _ = plan.execute("selective")
    scan, _ = plan.execute("scan")
    assert sel == scan
    assert [record_to_json(r) for r in sel] == [record_to_json(r) for r in scan]


def test_derived_contains_filter_matches_ledger(small_corpus):
    out, captures = small_corpus
    plan = (plan_for(small_corpus).enrich("string")
            .filter(parse_filter('path(payload.string) contains "internet"')))
    sel, _ = plan.execute()
    scan, _ = plan.execute("scan")
    expected = {(c.url, c.timestamp) for c in captures if "internet" in c.terms}
    assert {(r.meta.original_url, r.meta.timestamp) for r in sel} == expected
    assert sel == scan


def test_latest_per_url_matches_oracle(small_corpus):
    rows = read_cdx(small_corpus[0] / "index.cdx")
    records, _ = plan_for(small_corpus).latest_per_url().execute()
    assert [r.meta for r in records] == brute_force_latest(rows)
    assert len(records) == len({r.surt_url for r in rows})


def test_latest_per_url_ties_go_to_later_row():
    rows = read_cdx_lines([
        "com,a)/ 20120101000000 http://a.com/ text/html 200 AAA - - 10 0 f.warc.gz",
        "com,a)/ 20120101000000 http://a.com/ text/html 200 BBB - - 10 10 f.warc.gz",
        "com,a)/ 20110101000000 http://a.com/ text/html 200 CCC - - 10 20 f.warc.gz",
        "com,b)/ 20100101000000 http://b.com/ text/html 200 DDD - - 10 30 f.warc.gz",
    ])
    assert [r.digest for r in latest_per_url(rows)] == ["BBB", "DDD"]
    assert latest_per_url([]) == []


def read_cdx_lines(lines):
    from warcorpus.cdx import parse_cdx_line
    return [parse_cdx_line(line) for line in lines]


def test_filter_order_matters_around_grouping(small_corpus):
    base = plan_for(small_corpus)
    cond = parse_filter("status == 200")
    before = base.filter(cond).latest_per_url().count()
    after = base.latest_per_url().filter(cond).count()
    assert after <= before


def test_empty_selection(small_corpus):
    plan = plan_for(small_corpus).filter(parse_filter('surt == "no,such)/"')).enrich("string")
    for mode in ("selective", "scan"):
        records, stats = plan.execute(mode)
        assert records == [] and stats.records_out == 0
    assert plan.execute()[1].archive_bytes_read == 0


def test_take(small_corpus):
    plan = plan_for(small_corpus).enrich("string")
    assert plan.take(3) == plan.execute()[0][:3]


def test_filters_are_monotone(small_corpus):
    base = plan_for(small_corpus)
    a = base.filter(parse_filter('mime == "text/html"')).count()
    b = base.filter(parse_filter('mime == "text/html" && status == 200')).count()
    assert b <= a <= base.count()


@pytest.mark.parametrize("workers", [1, 2, 5])
def test_worker_count_does_not_change_output(small_corpus, workers):
    plan = plan_for(small_corpus).enrich("html-title")
    reference, _ = plan.execute(workers=1)
    assert plan.execute(workers=workers)[0] == reference
    assert plan.execute("scan", workers=workers)[0] == reference


def test_worker_count_validation(small_corpus):
    with pytest.raises(PlanError):
        plan_for(small_corpus).execute(workers=0)
    with pytest.raises(PlanError):
        plan_for(small_corpus).execute(mode="fast")


def test_static_plan_errors(small_corpus):
    base = plan_for(small_corpus)
    with pytest.raises(PlanError):
        base.enrich("nope")
    with pytest.raises(PlanError):
        base.enrich("map:length(payload.string)")
    with pytest.raises(PlanError):
        base.filter_derived("payload.string", parse_condition("path(payload.string)", "==", "x"))
    ok = base.enrich("string").filter_derived(
        "payload.string", parse_condition("path(payload.string)", "!=", ""))
    assert len(ok.steps) == 2


def test_broken_locator_is_annotated_and_droppable(small_corpus, tmp_path):
    out, _ = small_corpus
    rows = read_cdx(out / "index.cdx")
    rows[0] = replace(rows[0], offset=rows[0].offset + 3)
    cdx = tmp_path / "broken.cdx"
    with open(cdx, "w", encoding="utf-8") as fh:
        write_cdx(rows, fh)
    plan = open_archive(cdx, out).enrich("string")
    records, _ = plan.execute()
    assert len(records) == len(rows)
    assert "response" in records[0].errors and "string" in records[0].errors
    assert all(not r.errors for r in records[1:])
    assert plan.drop_errors().count() == len(rows) - 1


def test_map_enrich_callable(small_corpus):
    plan = plan_for(small_corpus).enrich("string").map_enrich(
        "payload.string", "words", lambda s: len(s.split()))
    for r in plan.take(5):
        assert r.get("payload.string.words") == len(r.get("payload.string").split())
