"""Command-line interface.

Batch commands (index build, scan, report, tfidf) call the library directly;
`verify` serves the triage JSON API over a report and a verdict log.
"""

from __future__ import annotations

import datetime
import functools
import json
from pathlib import Path

import click

from . import __version__
from .analytics import (
    CandidateStats,
    citation_stats,
    hit_rate_table,
    render_candidate_stats,
    render_citation_stats,
    render_hit_rate,
    render_tfidf,
    tfidf_diff,
)
from .bibindex import (
    build_index,
    ingest_acl_anthology,
    ingest_arxiv_snapshot,
    ingest_dblp,
    load_index,
    save_index,
)
from .config import ScanConfig, apply_overrides, load_config_file
from .errors import BindError, HallucheckError, IndexLoadError
from .external import CacheStore, RateLimiter, enrich_flags
from .scanning import build_report, load_report, scan_corpus, write_report
from .triage import HALLUCITED, TriageSession

DEFAULT_CACHE_DIR = ".hallucheck-cache"


def _cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HallucheckError as exc:
            raise click.ClickException(str(exc)) from None

    return wrapper


@click.group()
@click.version_option(__version__)
def main():
    """Citation integrity scanner: find citations no database can account for."""


# --- index ------------------------------------------------------------------------


@main.group()
def index():
    """Build bibliographic title indexes from database snapshots."""


@index.command("build")
@click.option(
    "--acl",
    "acl_dir",
    type=click.Path(exists=True, file_okay=False),
    default=None,
    help="directory of anthology volume XML files",
)
@click.option(
    "--arxiv",
    "arxiv_file",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSONL metadata snapshot",
)
@click.option(
    "--dblp",
    "dblp_file",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="dblp XML export",
)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_cli_errors
def index_build(acl_dir, arxiv_file, dblp_file, out_dir):
    """Ingest one or more snapshots into a searchable title index."""
    ingests = []
    if acl_dir:
        ingests.append(ingest_acl_anthology(acl_dir))
    if arxiv_file:
        ingests.append(ingest_arxiv_snapshot(arxiv_file))
    if dblp_file:
        ingests.append(ingest_dblp(dblp_file))
    if not ingests:
        raise click.UsageError("pass at least one of --acl, --arxiv, --dblp")
    records = [record for result in ingests for record in result.records]
    meta = {
        "sources": [result.describe() for result in ingests],
        "built_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    built = build_index(records, meta=meta)
    path = save_index(built, out_dir)
    for result in ingests:
        click.echo(result.describe())
    click.echo(f"indexed {len(built)} records -> {path}")


# --- scan -------------------------------------------------------------------------


def _load_index_dir(index_dir):
    try:
        return load_index(index_dir)
    except (HallucheckError, OSError) as exc:
        raise IndexLoadError(f"cannot load index from {index_dir}: {exc}") from None


def _effective_config(config_path, **overrides) -> ScanConfig:
    base = load_config_file(config_path) if config_path else ScanConfig()
    return apply_overrides(base, **overrides)


@main.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path())
@click.option(
    "--index",
    "index_dir",
    required=True,
    type=click.Path(exists=True, file_okay=False),
)
@click.option("--out", "out_path", default="hallucheck-report.json", show_default=True)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["json", "md", "csv"]),
    default="json",
    show_default=True,
    help="console summary format (the report file is always versioned JSON)",
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
)
@click.option("--online", is_flag=True, default=None, help="check leftover candidates against web services")
@click.option("--exhaustive", is_flag=True, default=None, help="queue every candidate of a HalluCited paper")
@click.option("--scan-all", "scan_all", is_flag=True, default=None, help="bypass the keyword prefilter")
@click.option("--rate-ms", "rate_ms", type=int, default=None, help="per-service request spacing")
@click.option("--cache-dir", "cache_dir", default=None, help="online lookup cache directory")
@_cli_errors
def scan(paths, index_dir, out_path, fmt, config_path, online, exhaustive, scan_all, rate_ms, cache_dir):
    """Scan reference-list files and write a candidate report."""
    config = _effective_config(
        config_path,
        online=online,
        exhaustive=exhaustive,
        scan_all=scan_all,
        rate_ms=rate_ms,
        cache_dir=cache_dir,
    )
    title_index = _load_index_dir(index_dir)
    scans = scan_corpus(list(paths), title_index, config)
    if config.online:
        cache = CacheStore(config.cache_dir or DEFAULT_CACHE_DIR)
        limiter = RateLimiter(config.rate_ms)
        enrich_flags(
            [flag for entry in scans for flag in entry.flags],
            cache,
            limiter,
            online=True,
            threshold=config.threshold,
        )
    report = build_report(scans, title_index, config)
    path = write_report(report, out_path)
    summary = report["summary"]
    if fmt == "json":
        click.echo(
            json.dumps(
                {
                    "report": str(path),
                    "papers": len(report["papers"]),
                    "papers_flagged": summary["papers_flagged"],
                    "citations_flagged": summary["citations_flagged"],
                },
                sort_keys=True,
            )
        )
    else:
        counts = [
            paper["citation_total"] for paper in report["papers"] if not paper["error"]
        ]
        if counts:
            click.echo(render_citation_stats(citation_stats(counts), fmt))
            click.echo("")
        click.echo(render_candidate_stats(CandidateStats(**summary), fmt))
        click.echo("")
        click.echo(f"report: {path}")


# --- report -----------------------------------------------------------------------


def _hit_rate_rows(report, log_path, exhaustive=False):
    session = TriageSession(report, log_path, exhaustive=exhaustive)
    statuses = session.statuses()
    rows = {}
    for source_id, paper in session.papers.items():
        flag_count = len(paper["flags"])
        if flag_count:
            rows[source_id] = (flag_count, statuses[source_id].state == HALLUCITED)
    if not rows:
        return []
    top_bin = max(1, min(9, max(count for count, _ in rows.values())))
    return hit_rate_table(rows, top_bin=top_bin)


@main.command("report")
@click.argument("report_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["md", "csv"]), default="md", show_default=True)
@click.option(
    "--log",
    "log_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="verdict log; adds the verification hit-rate table",
)
@_cli_errors
def report_cmd(report_path, fmt, log_path):
    """Render a report's statistics tables."""
    report = load_report(report_path)
    counts = [paper["citation_total"] for paper in report["papers"] if not paper["error"]]
    sections = []
    if counts:
        sections.append(("Citations per paper", render_citation_stats(citation_stats(counts), fmt)))
    sections.append(
        ("Candidates", render_candidate_stats(CandidateStats(**report["summary"]), fmt))
    )
    if log_path:
        rows = _hit_rate_rows(report, log_path)
        if rows:
            sections.append(("Verification hit rate", render_hit_rate(rows, fmt)))
    chunks = []
    for title, table in sections:
        if fmt == "md":
            chunks.append(f"## {title}\n\n{table}")
        else:
            chunks.append(table)
    output = "\n\n".join(chunks)
    if fmt == "md":
        output += (
            "\n\n*Averages are per flagged paper; fractions are over the scanned corpus.*"
        )
    click.echo(output)


# --- tfidf ------------------------------------------------------------------------


@main.command()
@click.option("--group-a", "group_a", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--group-b", "group_b", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--top", "top_k", type=int, default=None, help="keep the strongest N terms")
@click.option("--format", "fmt", type=click.Choice(["md", "csv"]), default="csv", show_default=True)
@_cli_errors
def tfidf(group_a, group_b, top_k, fmt):
    """Rank title terms that separate two groups of papers."""
    titles_a = [line for line in Path(group_a).read_text(encoding="utf-8").splitlines() if line.strip()]
    titles_b = [line for line in Path(group_b).read_text(encoding="utf-8").splitlines() if line.strip()]
    click.echo(render_tfidf(tfidf_diff(titles_a, titles_b, top_k=top_k), fmt))


# --- verify -----------------------------------------------------------------------


def parse_bind(addr: str) -> tuple[str, int]:
    """Split a host:port bind address, rejecting malformed values."""
    host, sep, port_text = addr.rpartition(":")
    if not sep or not host or not port_text.isdigit():
        raise BindError(f"bind address must be host:port, got {addr!r}")
    port = int(port_text)
    if not 1 <= port <= 65535:
        raise BindError(f"port must be in 1..65535, got {port}")
    return host, port


@main.command()
@click.argument("report_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--log", "log_path", required=True, type=click.Path(dir_okay=False))
@click.option("--bind", "bind_addr", default="127.0.0.1:8321", show_default=True)
@click.option("--exhaustive", is_flag=True, default=False, help="queue every candidate of a HalluCited paper")
@_cli_errors
def verify(report_path, log_path, bind_addr, exhaustive):
    """Serve the triage JSON API for human verification."""
    import uvicorn

    from .webapi import create_app

    host, port = parse_bind(bind_addr)
    app = create_app(report_path, log_path, exhaustive=exhaustive)
    click.echo(f"serving triage API on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
