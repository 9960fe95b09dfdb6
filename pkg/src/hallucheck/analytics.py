"""Corpus statistics: citation counts, candidate rates, risk tiers, TF-IDF.

All computations are pure. Quartiles use inclusive linear interpolation and
the standard deviation is the population form (divide by n); both choices are
stated here because the rendered tables do not name them. Percentages render
to 1 decimal place; underlying values keep full float precision.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import EmptyCorpusError, EmptyInputError, InconsistentTotalsError
from .matching import normalize_title


@dataclass(frozen=True)
class CitationStats:
    """Distribution of citation counts per paper."""

    mean: float
    std: float
    q1: float
    q2: float
    q3: float
    total: int


@dataclass(frozen=True)
class CandidateStats:
    """How much of a corpus was flagged, in papers and in citations."""

    papers_flagged: int
    papers_flagged_fraction: float
    citations_flagged: int
    citations_flagged_fraction: float
    avg_flags_per_flagged_paper: float
    max_flags_in_one_paper: int


@dataclass(frozen=True)
class HitRateRow:
    """One flag-count bin: verified-hallucitation rate among its papers."""

    freq_bin: str  # "≥N" for the open top bin, otherwise the flag count
    num_candidates: int
    cum_candidates: int
    num_hallucited: int
    cum_hallucited: int
    hit_rate: float | None  # None when the bin holds no papers
    cum_hit_rate: float | None


class RiskTier(enum.IntEnum):
    """Triage priority of a paper, derived from its flag count."""

    CLEAN = 0
    LOW = 1
    DOUBTFUL = 2
    HIGH = 3

    @property
    def label(self) -> str:
        return self.name.title()


@dataclass(frozen=True)
class TermWeightDiff:
    """One term's TF-IDF weight in each group and their difference."""

    term: str
    weight_a: float
    weight_b: float

    @property
    def diff(self) -> float:
        return self.weight_a - self.weight_b


def citation_stats(counts: Sequence[int]) -> CitationStats:
    """Summarize citation counts per paper (mean, population std, quartiles)."""
    if not counts:
        raise EmptyInputError("citation_stats needs at least one count")
    if len(counts) == 1:
        value = float(counts[0])
        q1 = q2 = q3 = value
    else:
        q1, q2, q3 = statistics.quantiles(counts, n=4, method="inclusive")
    return CitationStats(
        mean=statistics.fmean(counts),
        std=statistics.pstdev(counts),
        q1=q1,
        q2=q2,
        q3=q3,
        total=sum(counts),
    )


def candidate_stats(
    flags_per_paper: Mapping[str, int], paper_total: int, citation_total: int
) -> CandidateStats:
    """Fractions of papers/citations flagged, against the supplied totals."""
    if paper_total < 0 or citation_total < 0:
        raise InconsistentTotalsError("totals must be non-negative")
    if any(count < 0 for count in flags_per_paper.values()):
        raise InconsistentTotalsError("negative flag count")
    flagged = {paper: count for paper, count in flags_per_paper.items() if count > 0}
    papers_flagged = len(flagged)
    citations_flagged = sum(flagged.values())
    if papers_flagged > paper_total:
        raise InconsistentTotalsError(
            f"{papers_flagged} flagged papers exceed paper total {paper_total}"
        )
    if citations_flagged > citation_total:
        raise InconsistentTotalsError(
            f"{citations_flagged} flagged citations exceed citation total {citation_total}"
        )
    return CandidateStats(
        papers_flagged=papers_flagged,
        papers_flagged_fraction=papers_flagged / paper_total if paper_total else 0.0,
        citations_flagged=citations_flagged,
        citations_flagged_fraction=(
            citations_flagged / citation_total if citation_total else 0.0
        ),
        avg_flags_per_flagged_paper=(
            citations_flagged / papers_flagged if papers_flagged else 0.0
        ),
        max_flags_in_one_paper=max(flagged.values(), default=0),
    )


def hit_rate_table(
    rows: Mapping[str, tuple[int, bool]], top_bin: int = 9
) -> list[HitRateRow]:
    """Bin flagged papers by flag count; rate = verified fraction per bin.

    Bins run from the open top bin ("≥top_bin") down to 1; the cumulative
    columns accumulate from the highest bin downward, so the bottom row's
    cumulative rate is the overall rate.
    """
    if top_bin < 1:
        raise ValueError("top_bin must be >= 1")
    per_bin: dict[int, list[int]] = {k: [0, 0] for k in range(1, top_bin + 1)}
    for paper, (flag_count, hallucited) in rows.items():
        if flag_count < 1:
            raise ValueError(f"{paper}: flag count must be >= 1 in a hit-rate table")
        cell = per_bin[min(flag_count, top_bin)]
        cell[0] += 1
        cell[1] += int(bool(hallucited))
    table: list[HitRateRow] = []
    cum_candidates = cum_hallucited = 0
    for k in range(top_bin, 0, -1):
        num, hallu = per_bin[k]
        cum_candidates += num
        cum_hallucited += hallu
        table.append(
            HitRateRow(
                freq_bin=f"≥{top_bin}" if k == top_bin else str(k),
                num_candidates=num,
                cum_candidates=cum_candidates,
                num_hallucited=hallu,
                cum_hallucited=cum_hallucited,
                hit_rate=hallu / num if num else None,
                cum_hit_rate=cum_hallucited / cum_candidates if cum_candidates else None,
            )
        )
    return table


def risk_tier(flag_count: int, *, low: int = 1, doubtful: int = 3, high: int = 4) -> RiskTier:
    """Map a flag count to a triage tier. Boundaries are the minimum counts."""
    if not 0 < low <= doubtful <= high:
        raise ValueError("tier boundaries must satisfy 0 < low <= doubtful <= high")
    if flag_count < 0:
        raise ValueError("flag count must be >= 0")
    if flag_count >= high:
        return RiskTier.HIGH
    if flag_count >= doubtful:
        return RiskTier.DOUBTFUL
    if flag_count >= low:
        return RiskTier.LOW
    return RiskTier.CLEAN


def _tokenize(titles: Iterable[str]) -> list[list[str]]:
    return [normalize_title(title).split() for title in titles]


def tfidf_diff(
    titles_a: Sequence[str], titles_b: Sequence[str], top_k: int | None = None
) -> list[TermWeightDiff]:
    """Terms whose TF-IDF weight differs most between two title groups.

    Each title is one document for idf = ln((1+N)/(1+df)) + 1; tf counts a
    term across the group's concatenated titles; each group's weight vector
    is scaled to unit Euclidean norm. Output is sorted by |diff| descending,
    ties broken by term.
    """
    if not titles_a or not titles_b:
        raise EmptyCorpusError("both title groups must be nonempty")
    docs_a = _tokenize(titles_a)
    docs_b = _tokenize(titles_b)
    n_docs = len(docs_a) + len(docs_b)
    df: Counter[str] = Counter()
    for doc in (*docs_a, *docs_b):
        df.update(set(doc))
    idf = {term: math.log((1 + n_docs) / (1 + count)) + 1 for term, count in df.items()}

    def weights(docs: list[list[str]]) -> dict[str, float]:
        tf: Counter[str] = Counter()
        for doc in docs:
            tf.update(doc)
        raw = {term: count * idf[term] for term, count in tf.items()}
        norm = math.sqrt(sum(value * value for value in raw.values()))
        return {term: value / norm for term, value in raw.items()} if norm else {}

    weights_a = weights(docs_a)
    weights_b = weights(docs_b)
    diffs = [
        TermWeightDiff(term, weights_a.get(term, 0.0), weights_b.get(term, 0.0))
        for term in df
    ]
    diffs.sort(key=lambda d: (-abs(d.diff), d.term))
    return diffs[:top_k] if top_k is not None else diffs


# --- rendering -----------------------------------------------------------------


def percent(rate: float | None) -> str:
    """A rate in [0,1] as a 1-decimal percentage string; "-" when undefined."""
    return "-" if rate is None else f"{rate * 100:.1f}"


def _render(headers: list[str], rows: list[list[str]], fmt: str) -> str:
    if fmt == "md":
        lines = [
            "| " + " | ".join(headers) + " |",
            "| " + " | ".join("---" for _ in headers) + " |",
        ]
        lines.extend("| " + " | ".join(row) + " |" for row in rows)
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows(rows)
        return buffer.getvalue()
    raise ValueError(f"unknown table format: {fmt!r}")


def render_citation_stats(stats: CitationStats, fmt: str = "md") -> str:
    headers = ["mean", "std", "q1", "q2", "q3", "total"]
    row = [
        f"{stats.mean:.2f}",
        f"{stats.std:.2f}",
        f"{stats.q1:.2f}",
        f"{stats.q2:.2f}",
        f"{stats.q3:.2f}",
        str(stats.total),
    ]
    return _render(headers, [row], fmt)


def render_candidate_stats(stats: CandidateStats, fmt: str = "md") -> str:
    headers = [
        "papers_flagged",
        "papers_flagged_pct",
        "citations_flagged",
        "citations_flagged_pct",
        "avg_flags_per_flagged_paper",
        "max_flags_in_one_paper",
    ]
    row = [
        str(stats.papers_flagged),
        percent(stats.papers_flagged_fraction),
        str(stats.citations_flagged),
        percent(stats.citations_flagged_fraction),
        f"{stats.avg_flags_per_flagged_paper:.2f}",
        str(stats.max_flags_in_one_paper),
    ]
    return _render(headers, [row], fmt)


def render_hit_rate(table: list[HitRateRow], fmt: str = "md") -> str:
    headers = [
        "freq_bin",
        "num_candidates",
        "cum_candidates",
        "num_hallucited",
        "cum_hallucited",
        "hit_rate_pct",
        "cum_hit_rate_pct",
    ]
    rows = [
        [
            row.freq_bin,
            str(row.num_candidates),
            str(row.cum_candidates),
            str(row.num_hallucited),
            str(row.cum_hallucited),
            percent(row.hit_rate),
            percent(row.cum_hit_rate),
        ]
        for row in table
    ]
    return _render(headers, rows, fmt)


def render_tfidf(diffs: list[TermWeightDiff], fmt: str = "csv") -> str:
    headers = ["term", "weight_a", "weight_b", "diff"]
    rows = [
        [d.term, f"{d.weight_a:.6f}", f"{d.weight_b:.6f}", f"{d.diff:.6f}"]
        for d in diffs
    ]
    return _render(headers, rows, fmt)
