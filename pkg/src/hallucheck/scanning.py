"""Corpus scanning: run every citation check over a set of reference files.

Input files are parsed per extension (.bib, .txt plaintext lists, .blocks
page-block dumps), scanned in parallel, and merged into a versioned JSON
report sorted by source id, so identical inputs and config produce an
identical report apart from its timestamp.
"""

from __future__ import annotations

import datetime
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .analytics import RiskTier, candidate_stats, risk_tier
from .bibindex import TitleIndex
from .config import ScanConfig
from .errors import FormatError, HallucheckError, NoInputsError
from .matching import CandidateFlag, classify_citation
from .references import (
    DocumentText,
    ParsedReference,
    extract_reference_section,
    load_bibtex,
    load_plaintext_list,
    parse_reference,
    segment_entries,
)

REPORT_SCHEMA_VERSION = 1

_EXTENSIONS = (".bib", ".txt", ".blocks")


@dataclass(frozen=True)
class PaperScan:
    """Scan outcome for one input file."""

    source_id: str
    citation_total: int
    flags: tuple[CandidateFlag, ...]
    tier: RiskTier
    error: str | None = None


def parse_input_file(path: str | Path) -> list[ParsedReference]:
    """Parse one reference-list file according to its extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".bib":
        return load_bibtex(path)
    if suffix == ".txt":
        return [parse_reference(raw) for raw in load_plaintext_list(path)]
    if suffix == ".blocks":
        doc = DocumentText.from_blocks_file(path)
        section = extract_reference_section(doc)
        return [parse_reference(raw) for raw in segment_entries(section)]
    raise FormatError(
        f"unsupported input extension {path.suffix!r} (expected one of {', '.join(_EXTENSIONS)})"
    )


def scan_paper(
    source_id: str,
    citations: list[ParsedReference],
    index: TitleIndex,
    config: ScanConfig,
) -> PaperScan:
    """Check every citation of one paper and grade the paper by flag count."""
    flags = []
    for parsed in citations:
        flag = classify_citation(parsed, index, config)
        if flag is not None:
            flags.append(flag)
    return PaperScan(
        source_id=source_id,
        citation_total=len(citations),
        flags=tuple(flags),
        tier=_tier(len(flags), config),
    )


def _tier(flag_count: int, config: ScanConfig) -> RiskTier:
    return risk_tier(
        flag_count,
        low=config.tier_low,
        doubtful=config.tier_doubtful,
        high=config.tier_high,
    )


def _scan_one(path: Path, source_id: str, index: TitleIndex, config: ScanConfig) -> PaperScan:
    try:
        citations = parse_input_file(path)
    except (HallucheckError, OSError) as exc:
        return PaperScan(
            source_id=source_id,
            citation_total=0,
            flags=(),
            tier=_tier(0, config),
            error=f"{type(exc).__name__}: {exc}",
        )
    return scan_paper(source_id, citations, index, config)


def scan_corpus(
    paths: list[str | Path],
    index: TitleIndex,
    config: ScanConfig,
    max_workers: int | None = None,
) -> list[PaperScan]:
    """Scan every input file, one paper per file, in deterministic order.

    Files are processed in parallel; a file that cannot be parsed becomes an
    entry with an error note rather than aborting the corpus. The source id
    is the file stem; a repeated stem is itself recorded as an error entry.
    """
    if not paths:
        raise NoInputsError("no input files to scan")
    jobs: list[tuple[Path, str, bool]] = []
    seen: set[str] = set()
    for raw_path in paths:
        path = Path(raw_path)
        source_id = path.stem
        duplicate = source_id in seen
        seen.add(source_id)
        jobs.append((path, source_id, duplicate))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = []
        for path, source_id, duplicate in jobs:
            if duplicate:
                futures.append(None)
            else:
                futures.append(pool.submit(_scan_one, path, source_id, index, config))
        scans = []
        for (path, source_id, duplicate), future in zip(jobs, futures):
            if duplicate:
                scans.append(
                    PaperScan(
                        source_id=f"{source_id}#duplicate",
                        citation_total=0,
                        flags=(),
                        tier=_tier(0, config),
                        error=f"duplicate source id {source_id!r}: {path} ignored",
                    )
                )
            else:
                scans.append(future.result())
    scans.sort(key=lambda scan: scan.source_id)
    return scans


# --- report serialization --------------------------------------------------------


def _record_view(index: TitleIndex, record_id: str, score: float) -> dict:
    """A near-match entry with the record's display fields resolved now,
    because report consumers do not have the index."""
    record = index.get(record_id)
    return {
        "record_id": record_id,
        "score": score,
        "title": record.title if record else None,
        "url": record.url if record else None,
    }


def flag_to_json(flag: CandidateFlag, index: TitleIndex) -> dict:
    match = None
    if flag.match is not None:
        match = {
            "query_title": flag.match.query_title,
            "decision": flag.match.decision,
            "threshold_used": flag.match.threshold_used,
            "best": (
                _record_view(index, *flag.match.best) if flag.match.best else None
            ),
            "runners_up": [
                _record_view(index, rid, score) for rid, score in flag.match.runners_up
            ],
        }
    identifier = None
    if flag.identifier is not None:
        identifier = {
            "identifier": flag.identifier.identifier,
            "record_id": flag.identifier.record_id,
            "record_title": flag.identifier.record_title,
            "cited_title": flag.identifier.cited_title,
            "score": flag.identifier.score,
            "detail": flag.identifier.detail,
        }
    return {
        "kind": flag.kind,
        "ordinal": flag.ordinal,
        "raw": flag.raw,
        "cited_title": flag.cited_title,
        "keywords": list(flag.keywords),
        "match": match,
        "identifier": identifier,
        "db_coverage_note": flag.db_coverage_note,
        "external_note": flag.external_note,
        "external_hits": [list(pair) for pair in flag.external_hits],
    }


def build_report(
    scans: list[PaperScan],
    index: TitleIndex,
    config: ScanConfig,
    created_at: str | None = None,
) -> dict:
    """Assemble the versioned report document from per-paper scans."""
    scanned = [scan for scan in scans if scan.error is None]
    flags_per_paper = {scan.source_id: len(scan.flags) for scan in scanned}
    summary = candidate_stats(
        flags_per_paper,
        paper_total=len(scanned),
        citation_total=sum(scan.citation_total for scan in scanned),
    )
    papers = [
        {
            "source_id": scan.source_id,
            "citation_total": scan.citation_total,
            "tier": int(scan.tier),
            "tier_label": scan.tier.label,
            "error": scan.error,
            "flags": [flag_to_json(flag, index) for flag in scan.flags],
        }
        for scan in sorted(scans, key=lambda scan: scan.source_id)
    ]
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "created_at": created_at
        or datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "index_meta": dict(index.meta) | {
            "records": len(index),
            "coverage_max_year": index.coverage_max_year,
        },
        "config_digest": config.digest(),
        "config": {
            "threshold": config.threshold,
            "keywords": list(config.keywords),
            "scan_all": config.scan_all,
            "top_k": config.top_k,
            "tier_low": config.tier_low,
            "tier_doubtful": config.tier_doubtful,
            "tier_high": config.tier_high,
            "rate_ms": config.rate_ms,
            "exhaustive": config.exhaustive,
            "online": config.online,
        },
        "papers": papers,
        "summary": {
            "papers_flagged": summary.papers_flagged,
            "papers_flagged_fraction": summary.papers_flagged_fraction,
            "citations_flagged": summary.citations_flagged,
            "citations_flagged_fraction": summary.citations_flagged_fraction,
            "avg_flags_per_flagged_paper": summary.avg_flags_per_flagged_paper,
            "max_flags_in_one_paper": summary.max_flags_in_one_paper,
        },
    }


def dump_report(report: dict) -> str:
    """Canonical serialization: stable key order and separators."""
    return json.dumps(report, sort_keys=True, separators=(",", ": "), indent=1)


def write_report(report: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dump_report(report) + "\n", encoding="utf-8")
    return path


def load_report(path: str | Path) -> dict:
    """Read a report document back, checking its schema generation."""
    try:
        report = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read report {path}: {exc}") from None
    if not isinstance(report, dict) or report.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise FormatError(
            f"report {path} has schema version "
            f"{report.get('schema_version') if isinstance(report, dict) else '?'}"
            f" (expected {REPORT_SCHEMA_VERSION})"
        )
    return report
