"""Corpus building from web archives: CDX-first selection, selective record
access, lineage-preserving enrichment and JSON output."""

from .cdx import CdxRecord, parse_cdx_line, surt_from_url, timestamp_to_iso, write_cdx_line
from .corpusgen import CorpusSpec, cdx_from_warc, generate_corpus
from .enrich import (
    HTML_TITLE,
    RESPONSE,
    STRING_CONTENT,
    EnrichFunc,
    MapEnrich,
    Registry,
    apply_enrichment,
    default_registry,
    map_enrich,
)
from .filters import parse_filter
from .jsonout import load_corpus, record_to_json, save_corpus
from .model import EnrichedRecord, get_path, set_path
from .pipeline import ExecutionStats, Plan, open_archive
from .warc import RecordLocator, WarcRecord, parse_http_response, read_record_at, scan_records

__all__ = [
    "CdxRecord", "parse_cdx_line", "write_cdx_line", "surt_from_url", "timestamp_to_iso",
    "CorpusSpec", "generate_corpus", "cdx_from_warc",
    "EnrichFunc", "MapEnrich", "Registry", "apply_enrichment", "map_enrich",
    "default_registry", "RESPONSE", "STRING_CONTENT", "HTML_TITLE",
    "parse_filter", "record_to_json", "save_corpus", "load_corpus",
    "EnrichedRecord", "get_path", "set_path", "Plan", "ExecutionStats", "open_archive",
    "RecordLocator", "WarcRecord", "parse_http_response", "read_record_at", "scan_records",
]
