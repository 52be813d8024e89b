"""Command-line entry point.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import bench
from .cdx import payload_digest
from .corpusgen import CorpusSpec, cdx_from_warc, generate_corpus
from .errors import ArchiveError, PlanError, RegistryError
from .filters import parse_condition, parse_filter, parse_literal
from .jsonout import save_corpus
from .pipeline import Plan, open_archive
from .warc import CountingFile, RecordLocator, parse_http_response, read_record_at

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _plan_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cdx", action="append", required=True,
                   help="CDX index file (repeatable)")
    p.add_argument("--archive-dir", required=True,
                   help="directory holding the (W)ARC files named in the index")
    p.add_argument("--filter", dest="filter_expr",
                   help='metadata filter, e.g. \'status == 200 && mime == "text/html"\'')
    p.add_argument("--latest-per-url", action="store_true",
                   help="keep only the newest capture per URL (after --filter)")
    p.add_argument("--enrich", action="append", default=[],
                   help="enrichments in application order, comma-separated or repeated: "
                        "response, string, html-title, map:length(<path>)")
    p.add_argument("--derived-filter", nargs=3, action="append", default=[],
                   metavar=("PATH", "OP", "VALUE"),
                   help="filter on a derived field after the enrichments (repeatable)")
    p.add_argument("--drop-errors", action="store_true",
                   help="drop records whose enrichment failed")
    p.add_argument("--mode", choices=("selective", "scan"), default="selective")
    p.add_argument("--workers", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="warcorpus", description="Build research corpora from web archives.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen-corpus", help="write a synthetic archive corpus")
    g.add_argument("-o", "--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--domains", type=int, default=10)
    g.add_argument("--urls-per-domain", type=int, default=20)
    g.add_argument("--captures-per-url", type=int, default=5)
    g.add_argument("--files", type=int, default=4)
    g.add_argument("--period", nargs=2, metavar=("FROM", "TO"),
                   default=CorpusSpec.period)
    g.add_argument("--format", choices=("warc", "arc"), default="warc")
    g.add_argument("--no-cdx", action="store_true", help="skip writing index.cdx")

    c = sub.add_parser("cdx-gen", help="index archives into an 11-field CDX file")
    c.add_argument("archives", nargs="+")
    c.add_argument("-o", "--out", required=True)

    e = sub.add_parser("extract", help="run a plan and save the corpus as JSON")
    _plan_options(e)
    e.add_argument("-o", "--out", required=True, help="output path (.gz compresses)")
    e.add_argument("--pretty", action="store_true")
    e.add_argument("--base64-bytes", action="store_true")

    n = sub.add_parser("count", help="run a plan and print the record count")
    _plan_options(n)

    i = sub.add_parser("inspect", help="print the record at an archive offset")
    i.add_argument("--archive", required=True)
    i.add_argument("--offset", type=int, required=True)
    i.add_argument("--length", type=int, required=True)

    b = sub.add_parser("bench", help="selective vs scan benchmark")
    b.add_argument("--scenario", choices=("1", "2", "3", "all"), default="all")
    b.add_argument("--mode", choices=("selective", "scan", "both"), default="both")
    b.add_argument("--corpus", required=True)
    b.add_argument("--reps", type=int, default=bench.REPETITIONS)
    b.add_argument("--workers", type=int, default=None)
    b.add_argument("--csv", help="also write the per-repetition CSV here")
    return parser


def plan_from_args(args) -> Plan:
    plan = open_archive(args.cdx, args.archive_dir)
    if args.filter_expr:
        plan = plan.filter_meta(parse_filter(args.filter_expr))
    if args.latest_per_url:
        plan = plan.latest_per_url()
    for group in args.enrich:
        for name in _split_enrich(group):
            plan = plan.enrich(name)
    for path, op, value in args.derived_filter:
        cond = parse_condition(f"path({path})", op, parse_literal(value))
        plan = plan.filter_derived(path, cond)
    if args.drop_errors:
        plan = plan.drop_errors()
    return plan


def _split_enrich(text: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [s.strip() for s in out if s.strip()]


def _print_stats(stats, stream) -> None:
    d = stats.as_dict()
    print(" ".join(f"{k}={v:.3f}" if isinstance(v, float) else f"{k}={v}"
                   for k, v in d.items()), file=stream)


def cmd_gen_corpus(args) -> int:
    spec = CorpusSpec(domains=args.domains, urls_per_domain=args.urls_per_domain,
                      captures_per_url=args.captures_per_url, files=args.files,
                      period=tuple(args.period), seed=args.seed, format=args.format)
    captures = generate_corpus(spec, args.out, write_index=not args.no_cdx)
    print(f"wrote {len(captures)} captures to {args.out}")
    return EXIT_OK


def cmd_cdx_gen(args) -> int:
    rows = cdx_from_warc(args.archives, args.out)
    print(f"wrote {len(rows)} CDX rows to {args.out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    records, stats = plan_from_args(args).execute(args.mode, args.workers)
    save_corpus(records, args.out, pretty=args.pretty, base64_bytes=args.base64_bytes)
    _print_stats(stats, sys.stderr)
    return EXIT_OK


def cmd_count(args) -> int:
    records, stats = plan_from_args(args).execute(args.mode, args.workers)
    print(len(records))
    _print_stats(stats, sys.stdout)
    return EXIT_OK


def cmd_inspect(args) -> int:
    locator = RecordLocator(os.path.basename(args.archive), args.offset, args.length)
    with CountingFile.open(args.archive) as fh:
        record = read_record_at(fh, locator)
    out = {"version": record.version, "headers": record.headers.to_dict(),
           "payload_length": len(record.payload)}
    if record.payload.startswith(b"HTTP/"):
        http = parse_http_response(record.payload)
        out["http"] = {"status": http.status, "reason": http.reason,
                       "headers": http.headers.to_dict(), "body_length": len(http.body)}
        out["digest"] = payload_digest(http.body)
    else:
        out["digest"] = payload_digest(record.payload)
    print(json.dumps(out, indent=2, ensure_ascii=False))
    return EXIT_OK


def cmd_bench(args) -> int:
    scenarios = (1, 2, 3) if args.scenario == "all" else (int(args.scenario),)
    modes = bench.MODES if args.mode == "both" else (args.mode,)
    reports = bench.run_benchmark(args.corpus, scenarios, modes, args.reps, args.workers)
    print(bench.format_table(reports))
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            bench.write_csv(reports, fh)
    return EXIT_OK


COMMANDS = {
    "gen-corpus": cmd_gen_corpus,
    "cdx-gen": cmd_cdx_gen,
    "extract": cmd_extract,
    "count": cmd_count,
    "inspect": cmd_inspect,
    "bench": cmd_bench,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (PlanError, RegistryError, ValueError) as exc:
        if isinstance(exc, ArchiveError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArchiveError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    logging.basicConfig(level=logging.WARNING)
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
