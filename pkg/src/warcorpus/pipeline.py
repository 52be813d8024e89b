"""Lazily evaluated corpus-building plans.

A :class:`Plan` only records steps.  Execution happens in :meth:`Plan.execute`
(or ``count`` / ``take``) in one of two modes:

* ``selective`` streams the CDX, runs the leading metadata-only steps on the
  index alone and then reads just the surviving records from the archives;
* ``scan`` ignores the CDX, reads every archive front to back and derives
  the metadata from the records themselves.  It is the correctness oracle
  and the benchmark baseline.

Steps always run in the order they were added; nothing is re-planned.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Sequence

from .cdx import CdxRecord, cdx_record_from_warc, iter_cdx, sort_key
from .enrich import (
    EnrichFunc,
    MapEnrich,
    Registry,
    apply_enrichment,
    default_registry,
    map_enrich,
    parse_enrichment,
    resolve_map_input,
)
from .errors import PlanError
from .filters import FilterExpr
from .model import ERROR_ROOT, METADATA_ROOT, EnrichedRecord, get_path, join_path
from .warc import CountingFile, WarcRecord, read_record_at, scan_records

ARCHIVE_SUFFIXES = (".warc.gz", ".arc.gz")


@dataclass(frozen=True)
class MetaFilter:
    predicate: Callable[[CdxRecord], bool]


@dataclass(frozen=True)
class Enrich:
    target: EnrichFunc | MapEnrich


@dataclass(frozen=True)
class DerivedFilter:
    path: str
    predicate: Callable[[Any], bool]

    @property
    def is_metadata(self) -> bool:
        return self.path.split(".", 1)[0] == METADATA_ROOT


@dataclass(frozen=True)
class LatestPerUrl:
    pass


@dataclass(frozen=True)
class DropErrors:
    """Discard records carrying any ``error.*`` annotation."""


Step = MetaFilter | Enrich | DerivedFilter | LatestPerUrl | DropErrors


@dataclass
class ExecutionStats:
    cdx_lines_read: int = 0
    records_fetched: int = 0
    archive_bytes_read: int = 0
    records_out: int = 0
    wall_time: float = 0.0

    def add_io(self, other: "ExecutionStats") -> None:
        self.records_fetched += other.records_fetched
        self.archive_bytes_read += other.archive_bytes_read

    def as_dict(self) -> dict[str, Any]:
        return {
            "cdx_lines_read": self.cdx_lines_read,
            "records_fetched": self.records_fetched,
            "archive_bytes_read": self.archive_bytes_read,
            "records_out": self.records_out,
            "wall_time": self.wall_time,
        }


@dataclass(frozen=True)
class Source:
    cdx_paths: tuple[str, ...]
    archive_dir: str


class ArchiveReader:
    """Per-worker handle cache with byte accounting."""

    def __init__(self, archive_dir: str):
        self.archive_dir = archive_dir
        self._files: dict[str, CountingFile] = {}
        self.stats = ExecutionStats()

    def fetch(self, meta: CdxRecord) -> WarcRecord:
        fh = self._files.get(meta.filename)
        if fh is None:
            fh = CountingFile.open(os.path.join(self.archive_dir, meta.filename))
            self._files[meta.filename] = fh
        self.stats.records_fetched += 1
        return read_record_at(fh, meta.locator)

    def close(self) -> None:
        for fh in self._files.values():
            self.stats.archive_bytes_read += fh.bytes_read
            fh.close()
        self._files.clear()


def _apply_record_steps(record: EnrichedRecord, steps: Sequence[Step],
                        registry: Registry, fetch) -> EnrichedRecord | None:
    for step in steps:
        if isinstance(step, Enrich):
            if isinstance(step.target, MapEnrich):
                record = map_enrich(record, step.target, registry, fetch)
            else:
                record = apply_enrichment(record, step.target, registry, fetch)
        elif isinstance(step, DerivedFilter):
            if not step.predicate(get_path(record, step.path)):
                return None
        elif isinstance(step, MetaFilter):
            if not step.predicate(record.meta):
                return None
        elif isinstance(step, DropErrors):
            if record.errors:
                return None
        else:
            raise AssertionError(f"not a per-record step: {step!r}")
    return record


def latest_per_url(items: Sequence[Any], key: Callable[[Any], CdxRecord] = lambda r: r
                   ) -> list[Any]:
    """Keep the newest capture per SURT; ties go to the later item."""
    best: dict[str, int] = {}
    for i, item in enumerate(items):
        meta = key(item)
        j = best.get(meta.surt_url)
        if j is None or meta.timestamp >= key(items[j]).timestamp:
            best[meta.surt_url] = i
    keep = sorted(best.values())
    return [items[i] for i in keep]


def _partitions(items: Sequence[Any], n: int) -> list[Sequence[Any]]:
    n = max(1, min(n, len(items)))
    size, extra = divmod(len(items), n)
    out = []
    start = 0
    for i in range(n):
        end = start + size + (1 if i < extra else 0)
        out.append(items[start:end])
        start = end
    return out


def _is_metadata_step(step: Step) -> bool:
    return (isinstance(step, (MetaFilter, LatestPerUrl))
            or (isinstance(step, DerivedFilter) and step.is_metadata))


def _stages(steps: Sequence[Step]) -> list[Sequence[Step] | LatestPerUrl]:
    """Split steps into per-record runs separated by grouping barriers."""
    stages: list[Any] = []
    run: list[Step] = []
    for step in steps:
        if isinstance(step, LatestPerUrl):
            if run:
                stages.append(run)
                run = []
            stages.append(step)
        else:
            run.append(step)
    if run:
        stages.append(run)
    return stages


@dataclass(frozen=True)
class Plan:
    source: Source
    steps: tuple[Step, ...] = ()
    registry: Registry = field(default_factory=default_registry, compare=False)

    # -- construction (no IO) -------------------------------------------

    def _with(self, step: Step) -> "Plan":
        return replace(self, steps=self.steps + (step,))

    def filter_meta(self, predicate: Callable[[CdxRecord], bool]) -> "Plan":
        if isinstance(predicate, FilterExpr) and any(
                not c.is_metadata for c in predicate.conditions):
            plan = self
            meta = tuple(c for c in predicate.conditions if c.is_metadata)
            if meta:
                plan = plan._with(MetaFilter(FilterExpr(meta)))
            for c in predicate.conditions:
                if not c.is_metadata:
                    plan = plan.filter_derived(c.path, c)
            return plan
        return self._with(MetaFilter(predicate))

    filter = filter_meta

    def enrich(self, enrichment: EnrichFunc | MapEnrich | str) -> "Plan":
        if isinstance(enrichment, str):
            try:
                enrichment = parse_enrichment(enrichment, self.registry)
            except ValueError as exc:
                raise PlanError(str(exc)) from None
        if isinstance(enrichment, EnrichFunc):
            known = enrichment.name in self.registry
            if not known or self.registry[enrichment.name] is not enrichment:
                if known:
                    raise PlanError(
                        f"a different enrich function named {enrichment.name!r} "
                        "is already registered")
                raise PlanError(f"enrich function {enrichment.name!r} is not registered")
        elif isinstance(enrichment, MapEnrich):
            if enrichment.dependency is not None:
                if enrichment.dependency not in self.registry:
                    raise PlanError(f"unknown dependency {enrichment.dependency!r}")
            else:
                path = resolve_map_input(enrichment, self.registry)
                if not self._producible(path):
                    raise PlanError(
                        f"no earlier enrichment produces {path!r} for map enrichment")
        else:
            raise PlanError(f"not an enrichment: {enrichment!r}")
        return self._with(Enrich(enrichment))

    def map_enrich(self, input_path: str, result_key: str,
                   body: Callable[[Any], Any], dependency: str | None = None) -> "Plan":
        return self.enrich(MapEnrich(input_path, result_key, body, dependency))

    def filter_derived(self, path: str, predicate: Callable[[Any], bool]) -> "Plan":
        if not self._producible(path):
            raise PlanError(f"no earlier step produces the field {path!r}")
        return self._with(DerivedFilter(path, predicate))

    def latest_per_url(self) -> "Plan":
        return self._with(LatestPerUrl())

    def drop_errors(self) -> "Plan":
        return self._with(DropErrors())

    def producible_paths(self) -> set[str]:
        paths: set[str] = set()
        for step in self.steps:
            if not isinstance(step, Enrich):
                continue
            target = step.target
            if isinstance(target, MapEnrich):
                if target.dependency is not None:
                    for f in self.registry.chain(target.dependency):
                        paths.update(self.registry.result_paths(f.name))
                paths.add(join_path(resolve_map_input(target, self.registry),
                                    target.result_key))
            else:
                for f in self.registry.chain(target.name):
                    paths.update(self.registry.result_paths(f.name))
        return paths

    def _producible(self, path: str) -> bool:
        head = path.split(".", 1)[0]
        if head in (METADATA_ROOT, ERROR_ROOT):
            return True
        for p in self.producible_paths():
            if p == path or path.startswith(p + ".") or p.startswith(path + "."):
                return True
        return False

    # -- execution ------------------------------------------------------

    def _split(self) -> tuple[list[Step], list[Step]]:
        steps = list(self.steps)
        i = 0
        while i < len(steps) and _is_metadata_step(steps[i]):
            i += 1
        return steps[:i], steps[i:]

    def execute(self, mode: str = "selective", workers: int | None = None
                ) -> tuple[list[EnrichedRecord], ExecutionStats]:
        if mode == "selective":
            return self.execute_selective(workers)
        if mode == "scan":
            return self.execute_scan(workers)
        raise PlanError(f"unknown execution mode {mode!r}")

    def execute_selective(self, workers: int | None = None
                          ) -> tuple[list[EnrichedRecord], ExecutionStats]:
        start = time.perf_counter()
        stats = ExecutionStats()
        leading, rest = self._split()

        def cdx_rows():
            for path in self.source.cdx_paths:
                with open(path, encoding="utf-8", newline="\n") as fh:
                    for meta in iter_cdx(fh):
                        stats.cdx_lines_read += 1
                        yield meta

        records = _run_metadata_steps(cdx_rows(), leading)
        enriched = [EnrichedRecord(meta) for meta in records]

        def make_fetcher():
            return ArchiveReader(self.source.archive_dir)

        out = _run_stages(enriched, rest, self.registry, make_fetcher, stats,
                          _worker_count(workers))
        stats.records_out = len(out)
        stats.wall_time = time.perf_counter() - start
        return out, stats

    def execute_scan(self, workers: int | None = None
                     ) -> tuple[list[EnrichedRecord], ExecutionStats]:
        start = time.perf_counter()
        stats = ExecutionStats()
        leading, rest = self._split()
        # Row-local filters can run while scanning; grouping needs every row.
        local = []
        for step in leading:
            if isinstance(step, LatestPerUrl):
                break
            local.append(step)
        paths = archive_files(self.source.archive_dir)

        def scan_one(path: str):
            kept = []
            with CountingFile.open(path) as fh:
                for locator, warc in scan_records(fh, os.path.basename(path)):
                    if warc.record_type not in ("response", "resource"):
                        continue
                    meta = cdx_record_from_warc(warc, locator)
                    if all(_meta_ok(step, meta) for step in local):
                        kept.append((meta, warc))
                return kept, fh.bytes_read

        n = _worker_count(workers)
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(scan_one, paths))
        pairs = []
        for kept, nbytes in results:
            pairs.extend(kept)
            stats.archive_bytes_read += nbytes
        pairs.sort(key=lambda pair: sort_key(pair[0]))
        stats.cdx_lines_read = 0
        survivors = _run_metadata_steps([m for m, _ in pairs], leading[len(local):])
        by_locator = {m.locator: w for m, w in pairs}
        enriched = [EnrichedRecord(meta) for meta in survivors]
        del pairs

        class _MemoryFetcher:
            stats = ExecutionStats()

            def fetch(self, meta: CdxRecord) -> WarcRecord:
                return by_locator[meta.locator]

            def close(self) -> None:
                pass

        out = _run_stages(enriched, rest, self.registry, _MemoryFetcher, stats, n)
        stats.records_out = len(out)
        stats.wall_time = time.perf_counter() - start
        return out, stats

    def count(self, mode: str = "selective", workers: int | None = None) -> int:
        return len(self.execute(mode, workers)[0])

    def take(self, n: int, mode: str = "selective",
             workers: int | None = None) -> list[EnrichedRecord]:
        return self.execute(mode, workers)[0][:n]


def _meta_ok(step: Step, meta: CdxRecord) -> bool:
    if isinstance(step, MetaFilter):
        return bool(step.predicate(meta))
    if isinstance(step, DerivedFilter):
        return bool(step.predicate(get_path(EnrichedRecord(meta), step.path)))
    raise AssertionError(step)


def _run_metadata_steps(rows: Iterable[CdxRecord], steps: Sequence[Step]) -> list[CdxRecord]:
    rows_iter: Iterable[CdxRecord] = rows
    for stage in _stages(steps):
        if isinstance(stage, LatestPerUrl):
            rows_iter = latest_per_url(list(rows_iter))
        else:
            rows_iter = _filtered(rows_iter, stage)
    return list(rows_iter)


def _filtered(rows: Iterable[CdxRecord], steps: Sequence[Step]):
    for meta in rows:
        if all(_meta_ok(step, meta) for step in steps):
            yield meta


def _run_stages(records: list[EnrichedRecord], steps: Sequence[Step],
                registry: Registry, make_fetcher, stats: ExecutionStats,
                workers: int) -> list[EnrichedRecord]:
    for stage in _stages(steps):
        if isinstance(stage, LatestPerUrl):
            records = latest_per_url(records, key=lambda r: r.meta)
            continue

        def run(part: Sequence[EnrichedRecord], stage=stage):
            reader = make_fetcher()
            try:
                out = []
                for record in part:
                    result = _apply_record_steps(record, stage, registry, reader.fetch)
                    if result is not None:
                        out.append(result)
                return out
            finally:
                reader.close()
                stats_parts.append(reader.stats)

        stats_parts: list[ExecutionStats] = []
        parts = _partitions(records, workers)
        if len(parts) <= 1:
            merged = [run(p) for p in parts]
        else:
            with ThreadPoolExecutor(max_workers=len(parts)) as pool:
                merged = list(pool.map(run, parts))
        for s in stats_parts:
            stats.add_io(s)
        records = [r for part in merged for r in part]
    return records


def _worker_count(workers: int | None) -> int:
    if workers is None:
        return os.cpu_count() or 1
    if workers < 1:
        raise PlanError("workers must be at least 1")
    return workers


def archive_files(archive_dir: str) -> list[str]:
    names = sorted(n for n in os.listdir(archive_dir) if n.endswith(ARCHIVE_SUFFIXES))
    return [os.path.join(archive_dir, n) for n in names]


def open_archive(cdx: str | os.PathLike | Iterable[str | os.PathLike],
                 archive_dir: str | os.PathLike,
                 registry: Registry | None = None) -> Plan:
    """Start a plan over CDX index file(s) and the directory holding the archives."""
    if isinstance(cdx, (str, os.PathLike)):
        cdx_paths = (os.fspath(cdx),)
    else:
        cdx_paths = tuple(os.fspath(p) for p in cdx)
    return Plan(Source(cdx_paths, os.fspath(archive_dir)),
                registry=registry or default_registry())
