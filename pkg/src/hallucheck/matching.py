"""Fuzzy title matching and citation classification.

The scanner decides whether a cited title exists in the bibliographic index
by normalized edit-distance similarity:

    similarity(s1, s2) = 1 - lev(s1, s2) / max(len(s1), len(s2))

A citation whose best similarity falls below the decision threshold (0.9 by
default) becomes a candidate for human review. Lookups never scan the whole
index blindly: records are bucketed by normalized-title length and posted
under their character trigrams, and a query only examines buckets that could
contain a qualifying record (see ``search_title``).
"""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import EmptyQueryError

if TYPE_CHECKING:  # pragma: no cover - typing only, avoids an import cycle
    from .bibindex import TitleIndex
    from .references import ParsedReference

# Venue keywords that route a citation into the checking pipeline. Matching is
# whole-token and case-sensitive, except "arXiv" which matches any casing.
DEFAULT_KEYWORDS: tuple[str, ...] = (
    "ACL",
    "EMNLP",
    "NAACL",
    "EACL",
    "AACL",
    "CoNLL",
    "TACL",
    "Computational Linguistics",
    "Findings",
    "arXiv",
)

DEFAULT_THRESHOLD = 0.9
DEFAULT_TOP_K = 5

MATCHED = "Matched"
CANDIDATE = "Candidate"

# Flag kinds, most severe first. When several checks fire for one citation,
# classify_citation reports the earliest kind in this list.
FLAG_PRECEDENCE: tuple[str, ...] = (
    "IdentifierTitleMismatch",
    "TitleNotFound",
    "IdentifierNotFound",
    "MalformedIdentifier",
    "NoTitleExtracted",
)

_NONWORD_RE = re.compile(r"[\W_]+", re.UNICODE)


def normalize_title(title: str) -> str:
    """Fold a title into the index's canonical matching form.

    Unicode compatibility fold (so ligatures expand), casefold, every run of
    non-alphanumeric characters becomes a single space, and the result is
    trimmed. Applied repeatedly until stable, so the function is idempotent
    by construction.

    >>> normalize_title("CANINE: Pre-training an Efficient Tokenization-Free!")
    'canine pre training an efficient tokenization free'
    """
    cur = title
    for _ in range(8):
        nxt = _NONWORD_RE.sub(" ", unicodedata.normalize("NFKC", cur).casefold()).strip()
        if nxt == cur:
            return cur
        cur = nxt
    return cur  # pragma: no cover - no known codepoint needs 8 rounds


def levenshtein(a: str, b: str) -> int:
    """Exact edit distance (unit-cost insert/delete/substitute).

    Bit-parallel over the shorter string, so a pair of titles costs one
    machine-word pass per character of the longer one.

    >>> levenshtein("kitten", "sitting")
    3
    """
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) > len(b):
        a, b = b, a
    m = len(a)
    peq: dict[str, int] = {}
    for i, ch in enumerate(a):
        peq[ch] = peq.get(ch, 0) | (1 << i)
    mask = (1 << m) - 1
    last = 1 << (m - 1)
    pv = mask
    mv = 0
    score = m
    for ch in b:
        eq = peq.get(ch, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | ~(xh | pv)
        mh = pv & xh
        if ph & last:
            score += 1
        elif mh & last:
            score -= 1
        ph = (ph << 1) | 1
        pv = ((mh << 1) | ~(xv | ph)) & mask
        mv = ph & xv & mask
    return score


def similarity(s1: str, s2: str) -> float:
    """Normalized similarity: ``1 - lev(s1, s2) / max(len(s1), len(s2))``.

    Inputs are expected to be normalized already. Two empty strings are
    defined as identical (1.0).

    >>> round(similarity("kitten", "sitting"), 4)
    0.5714
    """
    if not s1 and not s2:
        return 1.0
    return 1.0 - levenshtein(s1, s2) / max(len(s1), len(s2))


def _pack_codepoints(titles: Sequence[str], width: int) -> np.ndarray:
    """Pad titles to ``width`` chars and view them as a (n, width) code matrix."""
    blob = "".join(t.ljust(width, "\x00") for t in titles)
    return np.frombuffer(blob.encode("utf-32-le"), dtype=np.uint32).reshape(
        len(titles), width
    )


def _batch_distances(query: str, titles: Sequence[str]) -> np.ndarray:
    """Edit distances from ``query`` to every title, bit-parallel over records.

    Runs the Myers vertical-delta recurrence with the query packed into
    64-bit blocks, advancing one title column per step across all records
    simultaneously.  Each record's distance is read off at its own length;
    the NUL padding beyond it matches no query character, and carries only
    propagate toward higher blocks, so shorter titles are unaffected by the
    extra columns.
    """
    n = len(titles)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    lens = np.fromiter((len(t) for t in titles), dtype=np.int64, count=n)
    m = len(query)
    if m == 0:
        return lens.copy()
    width = int(lens.max())
    if width == 0:
        return np.full(n, m, dtype=np.int64)
    mat = _pack_codepoints(titles, width)
    qcodes = np.frombuffer(query.encode("utf-32-le"), dtype=np.uint32)

    blocks = (m + 63) // 64
    qs, positions = np.unique(qcodes, return_inverse=True)
    # One bitmask row per distinct query character plus a zero row for
    # characters that appear in no query position.
    eq_masks = np.zeros((len(qs) + 1, blocks), dtype=np.uint64)
    for pos, row in enumerate(positions):
        eq_masks[row, pos // 64] |= np.uint64(1) << np.uint64(pos % 64)

    one = np.uint64(1)
    top_block = (m - 1) // 64
    top_bit = np.uint64((m - 1) % 64)
    top_mask = np.uint64((1 << (m - top_block * 64)) - 1)

    pv = [np.full(n, np.uint64(0xFFFFFFFFFFFFFFFF)) for _ in range(blocks)]
    pv[top_block] = np.full(n, top_mask)
    mv = [np.zeros(n, dtype=np.uint64) for _ in range(blocks)]
    score = np.full(n, m, dtype=np.int64)
    final = np.full(n, m, dtype=np.int64)

    for j in range(width):
        col = mat[:, j]
        idx = np.searchsorted(qs, col).clip(max=len(qs) - 1)
        rows = np.where(qs[idx] == col, idx, len(qs))
        add_carry = np.zeros(n, dtype=np.uint64)
        ph_carry = np.ones(n, dtype=np.uint64)  # boundary row D[i][0] = i
        mh_carry = np.zeros(n, dtype=np.uint64)
        for k in range(blocks):
            eq = eq_masks[rows, k]
            pvk, mvk = pv[k], mv[k]
            xv = eq | mvk
            low = eq & pvk
            s1 = low + pvk
            s2 = s1 + add_carry
            add_carry = ((s1 < low) | (s2 < s1)).astype(np.uint64)
            xh = (s2 ^ pvk) | eq
            ph = mvk | ~(xh | pvk)
            mh = pvk & xh
            if k == top_block:
                score += ((ph >> top_bit) & one).astype(np.int64)
                score -= ((mh >> top_bit) & one).astype(np.int64)
            ph_out, mh_out = ph >> np.uint64(63), mh >> np.uint64(63)
            ph = (ph << one) | ph_carry
            mh = (mh << one) | mh_carry
            ph_carry, mh_carry = ph_out, mh_out
            pv[k] = mh | ~(xv | ph)
            mv[k] = ph & xv
        pv[top_block] &= top_mask
        mv[top_block] &= top_mask
        ended = lens == j + 1
        if ended.any():
            final[ended] = score[ended]
    return final


def similarity_many(query: str, titles: Sequence[str]) -> np.ndarray:
    """Vectorized ``similarity(query, t)`` for every title.

    Element-for-element equal to the scalar function (same float division).
    """
    dists = _batch_distances(query, titles)
    lens = np.fromiter((len(t) for t in titles), dtype=np.int64, count=len(titles))
    denom = np.maximum(len(query), lens)
    out = np.ones(len(titles), dtype=np.float64)
    nz = denom > 0
    out[nz] = 1.0 - dists[nz] / denom[nz]
    return out


# --- blocked search ----------------------------------------------------------


def trigram_counts(s: str) -> Counter:
    """Multiset of character trigrams of ``s`` (empty below 3 chars)."""
    return Counter(s[i : i + 3] for i in range(len(s) - 2))


def _required_shared(query_len: int, record_len: int, tau: float) -> int:
    """Minimum shared-trigram count a record within similarity ``tau`` must have.

    With M = max(len) and k the largest edit distance allowed at ``tau``
    (k = floor((1 - tau) * M), nudged so float rounding never tightens it),
    a string of length M carries M - 2 trigrams and one edit destroys at
    most 3 of them, hence qualifying records share at least M - 2 - 3k.
    """
    m = max(query_len, record_len)
    k = int((1.0 - tau) * m + 1e-9)
    return m - 2 - 3 * k


def _probe_rids(index: "TitleIndex", qgrams: Counter, query_len: int, tau: float) -> set:
    """Record ids that could reach similarity ``tau`` against the query.

    Over-inclusion is harmless (exact scores decide); exclusion is only ever
    justified by the length bound or the shared-trigram bound above.
    """
    if tau <= 0.0:
        return set(range(len(index.ids)))
    # similarity >= tau forces len within [tau*L, L/tau]; widen by 1 against
    # float rounding.
    n_lo = max(0, int(tau * query_len) - 1)
    n_hi = int(query_len / tau) + 2
    width = index.BUCKET_WIDTH
    out: set[int] = set()
    for b in range(n_lo // width, n_hi // width + 1):
        bucket = index.buckets.get(b)
        if bucket is None:
            continue
        need = min(
            _required_shared(query_len, n, tau)
            for n in range(b * width, b * width + width)
        )
        if need <= 0:
            out.update(bucket.roster)
            continue
        acc: dict[int, int] = {}
        get = acc.get
        for gram, qcount in qgrams.items():
            posting = bucket.grams.get(gram)
            if posting is None:
                continue
            for rid, rcount in zip(posting[0], posting[1]):
                acc[rid] = get(rid, 0) + (qcount if qcount < rcount else rcount)
        out.update(rid for rid, shared in acc.items() if shared >= need)
    return out


@dataclass(frozen=True)
class MatchOutcome:
    """Result of one title lookup against the index."""

    query_title: str
    best: tuple[str, float] | None
    runners_up: tuple[tuple[str, float], ...]
    decision: str
    threshold_used: float


def search_title(
    index: "TitleIndex",
    title: str,
    threshold: float = DEFAULT_THRESHOLD,
    top_k: int = DEFAULT_TOP_K,
) -> MatchOutcome:
    """Find the closest indexed title and decide Matched vs Candidate.

    The probe starts at the decision threshold and relaxes it until the best
    score seen is at least as large as the probe level, at which point every
    record that could beat it has been examined, so ``best`` is the true
    argmax over the whole index. Ties break to the smallest record id.
    """
    qnorm = normalize_title(title)
    if not qnorm:
        raise EmptyQueryError("title is empty after normalization")
    qgrams = trigram_counts(qnorm)
    qlen = len(qnorm)
    examined: dict[int, float] = {}
    best_rid = -1
    best_score = -1.0
    tau = threshold
    while True:
        fresh = _probe_rids(index, qgrams, qlen, tau) - examined.keys()
        if fresh:
            rids = sorted(fresh)
            sims = similarity_many(qnorm, [index.norm_titles[r] for r in rids])
            for rid, s in zip(rids, sims):
                score = float(s)
                examined[rid] = score
                if score > best_score or (
                    score == best_score
                    and best_rid >= 0
                    and index.ids[rid] < index.ids[best_rid]
                ):
                    best_rid, best_score = rid, score
        if (best_rid >= 0 and best_score >= tau) or tau <= 0.0:
            break
        tau = tau - 0.1 if tau > 0.1 + 1e-9 else 0.0
    if best_rid >= 0:
        best = (index.ids[best_rid], best_score)
        decision = MATCHED if best_score >= threshold else CANDIDATE
    else:
        best = None
        decision = CANDIDATE
    others = sorted(
        ((index.ids[r], s) for r, s in examined.items() if r != best_rid),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return MatchOutcome(
        query_title=qnorm,
        best=best,
        runners_up=tuple(others[: max(0, top_k)]),
        decision=decision,
        threshold_used=threshold,
    )


# --- keyword prefilter ---------------------------------------------------------


@lru_cache(maxsize=256)
def _keyword_pattern(keyword: str) -> re.Pattern:
    flags = re.IGNORECASE if keyword.lower() == "arxiv" else 0
    body = re.escape(keyword).replace(r"\ ", r"\s+")
    return re.compile(rf"(?<!\w){body}(?!\w)", flags)


def detect_keywords(text: str, keywords: Iterable[str] | None = None) -> tuple[str, ...]:
    """Keywords present in ``text`` as whole tokens, in canonical order.

    Venue acronyms match case-sensitively ("ACL" never fires inside "NAACL"
    or on "acl"); "arXiv" matches any casing.
    """
    kws = DEFAULT_KEYWORDS if keywords is None else tuple(keywords)
    return tuple(kw for kw in kws if _keyword_pattern(kw).search(text))


# --- identifier cross-checking ---------------------------------------------------


@dataclass(frozen=True)
class IdentifierCheck:
    """Evidence attached to identifier-derived flags."""

    identifier: str
    record_id: str | None = None
    record_title: str | None = None
    cited_title: str | None = None
    score: float | None = None
    detail: str = ""


@dataclass
class CandidateFlag:
    """One citation that failed a check and needs human review."""

    kind: str
    ordinal: int
    raw: str
    cited_title: str | None = None
    keywords: tuple[str, ...] = ()
    match: MatchOutcome | None = None
    identifier: IdentifierCheck | None = None
    db_coverage_note: str | None = None
    # filled by online enrichment; never affects kind
    external_note: str | None = None
    external_hits: tuple[tuple[str, float], ...] = ()


def _coverage_note(cited_year: int | None, index: "TitleIndex") -> str | None:
    newest = index.coverage_max_year
    if cited_year is not None and newest is not None and cited_year > newest:
        return (
            f"cited year {cited_year} postdates the newest indexed year "
            f"{newest}; the record may simply be missing from the snapshot"
        )
    return None


def cross_check_identifier(
    parsed: "ParsedReference",
    index: "TitleIndex",
    threshold: float = DEFAULT_THRESHOLD,
) -> CandidateFlag | None:
    """Check the citation's identifiers against the index.

    An identifier that resolves to a record whose title disagrees with the
    cited title (similarity below ``threshold``) is the strongest signal and
    yields IdentifierTitleMismatch with both titles and the score. A
    well-formed identifier with no record yields IdentifierNotFound, softened
    by a coverage note when the cited year postdates the snapshot. Identifier
    text that violates the grammar yields MalformedIdentifier.
    """
    ids = parsed.identifiers
    if ids is None:
        return None
    note = _coverage_note(parsed.year, index)
    lookups: list[tuple[str, str]] = []  # (display form, index id)
    if ids.arxiv_id is not None:
        lookups.append((f"arXiv:{ids.arxiv_id.value}", f"arxiv:{ids.arxiv_id.base}"))
    if ids.acl_id is not None:
        lookups.append((ids.acl_id, f"acl:{ids.acl_id}"))

    not_found: IdentifierCheck | None = None
    for display, index_id in lookups:
        record = index.get(index_id)
        if record is None:
            if not_found is None:
                not_found = IdentifierCheck(
                    identifier=display,
                    detail=f"{index_id} is not in the index",
                )
            continue
        if parsed.title is None:
            continue  # resolved, but nothing to compare against
        cited_norm = normalize_title(parsed.title)
        score = similarity(cited_norm, record.norm_title)
        if score < threshold:
            return CandidateFlag(
                kind="IdentifierTitleMismatch",
                ordinal=parsed.raw.ordinal,
                raw=parsed.raw.text,
                cited_title=parsed.title,
                identifier=IdentifierCheck(
                    identifier=display,
                    record_id=record.id,
                    record_title=record.title,
                    cited_title=parsed.title,
                    score=score,
                    detail="identifier resolves to a differently titled work",
                ),
                db_coverage_note=note,
            )
    if not_found is not None:
        return CandidateFlag(
            kind="IdentifierNotFound",
            ordinal=parsed.raw.ordinal,
            raw=parsed.raw.text,
            cited_title=parsed.title,
            identifier=not_found,
            db_coverage_note=note,
        )
    if ids.malformed:
        snippet = ids.malformed[0]
        return CandidateFlag(
            kind="MalformedIdentifier",
            ordinal=parsed.raw.ordinal,
            raw=parsed.raw.text,
            cited_title=parsed.title,
            identifier=IdentifierCheck(
                identifier=snippet,
                detail="identifier text violates the arXiv grammar",
            ),
            db_coverage_note=note,
        )
    return None


def classify_citation(
    parsed: "ParsedReference",
    index: "TitleIndex",
    config=None,
) -> CandidateFlag | None:
    """Run one citation through the full checking pipeline.

    Citations without any routing keyword are skipped outright (unless the
    config disables the prefilter). The remaining checks each may fire a
    flag; the one reported is the most severe per ``FLAG_PRECEDENCE``.
    Absent result means the citation passed.
    """
    threshold = getattr(config, "threshold", DEFAULT_THRESHOLD)
    keywords = getattr(config, "keywords", None)
    scan_all = getattr(config, "scan_all", False)
    top_k = getattr(config, "top_k", DEFAULT_TOP_K)

    matched_keywords = detect_keywords(parsed.raw.text, keywords)
    if not matched_keywords and not scan_all:
        return None

    flags: list[CandidateFlag] = []
    if parsed.title is None:
        flags.append(
            CandidateFlag(
                kind="NoTitleExtracted",
                ordinal=parsed.raw.ordinal,
                raw=parsed.raw.text,
            )
        )
    else:
        outcome = search_title(index, parsed.title, threshold=threshold, top_k=top_k)
        if outcome.decision == CANDIDATE:
            flags.append(
                CandidateFlag(
                    kind="TitleNotFound",
                    ordinal=parsed.raw.ordinal,
                    raw=parsed.raw.text,
                    cited_title=parsed.title,
                    match=outcome,
                )
            )
    id_flag = cross_check_identifier(parsed, index, threshold=threshold)
    if id_flag is not None:
        flags.append(id_flag)
    if not flags:
        return None
    flags.sort(key=lambda f: FLAG_PRECEDENCE.index(f.kind))
    chosen = flags[0]
    chosen.keywords = matched_keywords
    if chosen.db_coverage_note is None:
        chosen.db_coverage_note = _coverage_note(parsed.year, index)
    return chosen
