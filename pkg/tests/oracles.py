"""Independent reference implementations used to validate the package.

Everything here is deliberately naive: full-matrix DP, exhaustive recursion,
plain linear scans. Slow and obviously correct beats fast and clever for an
oracle.
"""

from __future__ import annotations


def dp_levenshtein(a: str, b: str) -> int:
    """Classic full-matrix Wagner-Fischer edit distance."""
    m, n = len(a), len(b)
    prev = list(range(n + 1))
    for i in range(1, m + 1):
        cur = [i] + [0] * n
        ai = a[i - 1]
        for j in range(1, n + 1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (ai != b[j - 1]),
            )
        prev = cur
    return prev[n]


def enum_levenshtein(a: str, b: str) -> int:
    """Exhaustive edit-script search, no memoization. Only for tiny strings.

    Tries every script of deletions, insertions, and substitutions, so its
    only assumption is the definition of the three edit operations.
    """
    if not a:
        return len(b)
    if not b:
        return len(a)
    best = enum_levenshtein(a[1:], b[1:]) + (a[0] != b[0])
    best = min(best, enum_levenshtein(a[1:], b) + 1)
    best = min(best, enum_levenshtein(a, b[1:]) + 1)
    return best


def oracle_similarity(s1: str, s2: str) -> float:
    if not s1 and not s2:
        return 1.0
    return 1.0 - dp_levenshtein(s1, s2) / max(len(s1), len(s2))


def linear_scan_best(
    ids: list[str], norm_titles: list[str], query_norm: str, threshold: float
) -> tuple[str | None, float, str]:
    """Exhaustive search: score every record, ties to the smallest id."""
    best_id: str | None = None
    best_score = -1.0
    for record_id, norm_title in zip(ids, norm_titles):
        score = oracle_similarity(query_norm, norm_title)
        if score > best_score or (score == best_score and best_id is not None and record_id < best_id):
            best_id, best_score = record_id, score
    decision = "Matched" if best_id is not None and best_score >= threshold else "Candidate"
    return best_id, best_score, decision


def quartiles_inclusive(values: list[float]) -> tuple[float, float, float]:
    """Sort-and-interpolate quartiles (linear interpolation, inclusive)."""
    data = sorted(values)
    n = len(data)

    def at(p: float) -> float:
        pos = (n - 1) * p
        lo = int(pos)
        hi = min(lo + 1, n - 1)
        frac = pos - lo
        return data[lo] * (1 - frac) + data[hi] * frac

    return at(0.25), at(0.5), at(0.75)


def population_std(values: list[float]) -> float:
    mean = sum(values) / len(values)
    return (sum((v - mean) ** 2 for v in values) / len(values)) ** 0.5
