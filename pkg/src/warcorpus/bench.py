"""Selective vs. scan benchmark over the three corpus-building scenarios.

Every scenario selects a subset, enriches it with its string content and
the length of that string, and sums the lengths:

1. all captures of one URL,
2. all text/html captures of one domain,
3. the latest status-200 capture per URL within one month.
"""

from __future__ import annotations

import csv
import io
import os
import statistics
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from .cdx import read_cdx, surt_from_url
from .corpusgen import CDX_NAME
from .errors import ArchiveError
from .filters import parse_filter
from .pipeline import ExecutionStats, Plan, archive_files, open_archive

CSV_COLUMNS = ("scenario", "mode", "rep", "wall_ms", "cdx_lines", "records_fetched",
               "archive_bytes", "records_out", "length_sum")
REPETITIONS = 5
MODES = ("selective", "scan")


class SetupError(ArchiveError):
    pass


@dataclass(frozen=True)
class ScenarioParams:
    url: str
    domain: str
    month: str = "201112"


@dataclass
class ScenarioReport:
    scenario: int
    mode: str
    rows: list[dict] = field(default_factory=list)

    @property
    def wall_ms(self) -> list[float]:
        return [r["wall_ms"] for r in self.rows]

    @property
    def median_ms(self) -> float:
        return statistics.median(self.wall_ms)

    @property
    def length_sum(self) -> int:
        return self.rows[0]["length_sum"]

    @property
    def records_out(self) -> int:
        return self.rows[0]["records_out"]

    @property
    def archive_bytes(self) -> int:
        return self.rows[0]["archive_bytes"]

    def summary(self) -> dict:
        w = self.wall_ms
        return {"scenario": self.scenario, "mode": self.mode, "min_ms": min(w),
                "median_ms": statistics.median(w), "max_ms": max(w),
                "archive_bytes": self.archive_bytes, "records_out": self.records_out,
                "length_sum": self.length_sum}


def corpus_paths(corpus_dir: str) -> tuple[str, str]:
    cdx = os.path.join(corpus_dir, CDX_NAME)
    if not os.path.isdir(corpus_dir):
        raise SetupError(f"corpus directory {corpus_dir!r} does not exist")
    if not os.path.isfile(cdx):
        raise SetupError(f"no {CDX_NAME} in {corpus_dir!r}; run cdx-gen first")
    if not archive_files(corpus_dir):
        raise SetupError(f"no archive files in {corpus_dir!r}")
    return cdx, corpus_dir


def default_params(corpus_dir: str) -> ScenarioParams:
    """Pick the scenario targets deterministically from the index."""
    rows = read_cdx(corpus_paths(corpus_dir)[0])
    if not rows:
        raise SetupError("the CDX index is empty")
    url = rows[len(rows) // 2].original_url
    return ScenarioParams(url=url, domain=_host(url))


def _host(url: str) -> str:
    return (urlsplit(url).hostname or "").lower()


def domain_surt_prefix(domain: str) -> str:
    return ",".join(reversed(domain.lower().split("."))) + ")"


def scenario_plan(scenario: int, corpus_dir: str, params: ScenarioParams | None = None) -> Plan:
    cdx, archive_dir = corpus_paths(corpus_dir)
    params = params or default_params(corpus_dir)
    plan = open_archive(cdx, archive_dir)
    if scenario == 1:
        plan = plan.filter_meta(parse_filter(f'surt == "{surt_from_url(params.url)}"'))
    elif scenario == 2:
        prefix = domain_surt_prefix(params.domain)
        plan = plan.filter_meta(parse_filter(f'surt prefix "{prefix}" && mime == "text/html"'))
    elif scenario == 3:
        plan = plan.filter_meta(parse_filter(
            f'timestamp prefix "{params.month}" && status == 200')).latest_per_url()
    else:
        raise ValueError(f"unknown scenario {scenario}")
    return plan.enrich("string").enrich("map:length(payload.string)")


def length_sum(records) -> int:
    return sum(r.get("payload.string.length", 0) for r in records)


def run_scenario(scenario: int, mode: str, corpus_dir: str, reps: int = REPETITIONS,
                 workers: int | None = None, params: ScenarioParams | None = None
                 ) -> ScenarioReport:
    plan = scenario_plan(scenario, corpus_dir, params)
    report = ScenarioReport(scenario, mode)
    for rep in range(1, reps + 1):
        records, stats = plan.execute(mode, workers)
        report.rows.append(_row(scenario, mode, rep, stats, length_sum(records)))
    return report


def _row(scenario: int, mode: str, rep: int, stats: ExecutionStats, total: int) -> dict:
    return {"scenario": scenario, "mode": mode, "rep": rep,
            "wall_ms": round(stats.wall_time * 1000, 3),
            "cdx_lines": stats.cdx_lines_read, "records_fetched": stats.records_fetched,
            "archive_bytes": stats.archive_bytes_read, "records_out": stats.records_out,
            "length_sum": total}


def write_csv(reports: list[ScenarioReport], out) -> None:
    w = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for report in reports:
        w.writerows(report.rows)


def format_table(reports: list[ScenarioReport]) -> str:
    head = (f"{'scenario':>8} {'mode':>9} {'min_ms':>10} {'median_ms':>10} {'max_ms':>10} "
            f"{'archive_bytes':>14} {'records_out':>11} {'length_sum':>12}")
    lines = [head, "-" * len(head)]
    for r in reports:
        s = r.summary()
        lines.append(f"{s['scenario']:>8} {s['mode']:>9} {s['min_ms']:>10.1f} "
                     f"{s['median_ms']:>10.1f} {s['max_ms']:>10.1f} {s['archive_bytes']:>14} "
                     f"{s['records_out']:>11} {s['length_sum']:>12}")
    by_key = {(r.scenario, r.mode): r for r in reports}
    for scenario in sorted({r.scenario for r in reports}):
        sel, scan = by_key.get((scenario, "selective")), by_key.get((scenario, "scan"))
        if sel and scan and sel.median_ms > 0:
            lines.append(f"scenario {scenario}: scan/selective median ratio "
                         f"{scan.median_ms / sel.median_ms:.1f}x")
    return "\n".join(lines)


def run_benchmark(corpus_dir: str, scenarios=(1, 2, 3), modes=MODES,
                  reps: int = REPETITIONS, workers: int | None = None
                  ) -> list[ScenarioReport]:
    params = default_params(corpus_dir)
    return [run_scenario(s, m, corpus_dir, reps, workers, params)
            for s in scenarios for m in modes]


def csv_text(reports: list[ScenarioReport]) -> str:
    buf = io.StringIO()
    write_csv(reports, buf)
    return buf.getvalue()
