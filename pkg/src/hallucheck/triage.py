"""Human verification workflow over a scan report.

The scan report is immutable input; verdicts accrete in an append-only
JSON-Lines log that is flushed to disk before a submission is acknowledged.
Derived paper states are recomputed from (report, log) alone, so a restart
replays to exactly the same state. A verdict may be re-submitted: the log
keeps every line for audit, while derived state applies last-write-wins per
(paper, ordinal, verifier).
"""

from __future__ import annotations

import dataclasses
import datetime
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .analytics import HitRateRow, hit_rate_table
from .errors import CorruptLogError, VerdictValidationError

VERDICT_LABELS = ("Exists", "HalluCitation", "Unsure")
MISMATCH_ATTRIBUTES = ("title", "authors", "venue", "pages", "year", "identifier")

PENDING = "Pending"
HALLUCITED = "HalluCited"
CLEARED = "Cleared"


@dataclass(frozen=True)
class Verdict:
    """One recorded human judgment about one flagged citation."""

    paper: str
    ordinal: int
    label: str
    mismatches: tuple[str, ...] = ()
    not_found: bool = False
    evidence_url: str | None = None
    note: str | None = None
    verifier: str = "anonymous"
    timestamp: str = ""

    def to_json(self) -> dict:
        return {
            "paper": self.paper,
            "ordinal": self.ordinal,
            "label": self.label,
            "mismatches": list(self.mismatches),
            "not_found": self.not_found,
            "evidence_url": self.evidence_url,
            "note": self.note,
            "verifier": self.verifier,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Verdict":
        return cls(
            paper=data["paper"],
            ordinal=data["ordinal"],
            label=data["label"],
            mismatches=tuple(data.get("mismatches", ())),
            not_found=bool(data.get("not_found", False)),
            evidence_url=data.get("evidence_url"),
            note=data.get("note"),
            verifier=data.get("verifier", "anonymous"),
            timestamp=data.get("timestamp", ""),
        )


@dataclass(frozen=True)
class PaperStatus:
    """Verification state of one paper, derived from its effective verdicts."""

    source_id: str
    state: str
    skipped_ordinals: tuple[int, ...] = ()


def check_verdict(verdict: Verdict, flagged_ordinals: dict[str, set[int]]) -> None:
    """Enforce the submission rules; raises with a machine-readable reason.

    A HalluCitation verdict must assert either that no corresponding work
    was found, or mismatches on at least two attributes.
    """
    if verdict.label not in VERDICT_LABELS:
        raise VerdictValidationError(
            "unknown_label",
            f"label must be one of {', '.join(VERDICT_LABELS)}, got {verdict.label!r}",
        )
    unknown = [m for m in verdict.mismatches if m not in MISMATCH_ATTRIBUTES]
    if unknown:
        raise VerdictValidationError(
            "unknown_attribute",
            f"unknown mismatch attribute(s): {', '.join(sorted(unknown))}",
        )
    if len(set(verdict.mismatches)) != len(verdict.mismatches):
        raise VerdictValidationError(
            "unknown_attribute", "mismatch attributes must not repeat"
        )
    if verdict.paper not in flagged_ordinals:
        raise VerdictValidationError(
            "unknown_paper", f"no flagged paper {verdict.paper!r} in this report"
        )
    if verdict.ordinal not in flagged_ordinals[verdict.paper]:
        raise VerdictValidationError(
            "unknown_ordinal",
            f"paper {verdict.paper!r} has no flagged citation #{verdict.ordinal}",
        )
    if verdict.label == "HalluCitation" and not verdict.not_found:
        if len(verdict.mismatches) < 2:
            raise VerdictValidationError(
                "two_attribute_rule",
                "a HalluCitation verdict needs not_found or mismatches on "
                "at least two of: " + ", ".join(MISMATCH_ATTRIBUTES),
            )


class VerdictLog:
    """Append-only JSON-Lines store; a verdict is durable once append returns."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self.entries: list[Verdict] = list(self._replay())

    def _replay(self):
        if not self.path.exists():
            return
        with self.path.open("r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, 1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                    verdict = Verdict.from_json(data)
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CorruptLogError(
                        self.path, line_no, f"undecodable verdict line ({exc})"
                    ) from None
                yield verdict

    def append(self, verdict: Verdict) -> None:
        line = json.dumps(verdict.to_json(), sort_keys=True)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            self.entries.append(verdict)


def effective_verdicts(entries: list[Verdict]) -> dict[tuple[str, int, str], Verdict]:
    """Last verdict per (paper, ordinal, verifier); later timestamp wins,
    later log position breaking exact ties."""
    chosen: dict[tuple[str, int, str], tuple[str, int, Verdict]] = {}
    for position, verdict in enumerate(entries):
        key = (verdict.paper, verdict.ordinal, verdict.verifier)
        stamp = (verdict.timestamp, position)
        if key not in chosen or stamp >= chosen[key][:2]:
            chosen[key] = (verdict.timestamp, position, verdict)
    return {key: verdict for key, (_, _, verdict) in chosen.items()}


def derive_status(
    source_id: str,
    flagged: set[int],
    effective: dict[tuple[str, int, str], Verdict],
) -> PaperStatus:
    """Fold a paper's effective verdicts into its state.

    HalluCited as soon as any verdict says HalluCitation. Cleared only when
    every flagged citation has a verdict and every verdict says Exists —
    an Unsure keeps the paper Pending rather than vouching for it.
    """
    mine = [v for (paper, _, _), v in effective.items() if paper == source_id]
    verdicted = {v.ordinal for v in mine}
    if any(v.label == "HalluCitation" for v in mine):
        skipped = tuple(sorted(flagged - verdicted))
        return PaperStatus(source_id, HALLUCITED, skipped)
    if flagged <= verdicted and all(v.label == "Exists" for v in mine):
        return PaperStatus(source_id, CLEARED)
    return PaperStatus(source_id, PENDING)


@dataclass(frozen=True)
class QueueItem:
    """One candidate awaiting review, with its paper's total flag count."""

    source_id: str
    ordinal: int
    flag_count: int
    flag: dict = field(compare=False)


class TriageSession:
    """Report + verdict log + derived state behind the verification API."""

    def __init__(
        self, report: dict, log_path: str | Path, exhaustive: bool = False
    ) -> None:
        self.report = report
        self.exhaustive = exhaustive
        self.papers: dict[str, dict] = {
            paper["source_id"]: paper for paper in report["papers"]
        }
        self.flagged_ordinals: dict[str, set[int]] = {
            source_id: {flag["ordinal"] for flag in paper["flags"]}
            for source_id, paper in self.papers.items()
        }
        self.log = VerdictLog(log_path)
        self._write_lock = threading.Lock()
        self._verifier_last: dict[str, datetime.datetime] = {}
        for verdict in self.log.entries:
            try:
                when = datetime.datetime.fromisoformat(verdict.timestamp)
            except ValueError:
                continue
            prev = self._verifier_last.get(verdict.verifier)
            if prev is None or when > prev:
                self._verifier_last[verdict.verifier] = when

    # -- state ---------------------------------------------------------------

    def effective(self) -> dict[tuple[str, int, str], Verdict]:
        return effective_verdicts(self.log.entries)

    def statuses(self) -> dict[str, PaperStatus]:
        effective = self.effective()
        return {
            source_id: derive_status(
                source_id, self.flagged_ordinals[source_id], effective
            )
            for source_id in self.papers
        }

    def status_of(self, source_id: str) -> PaperStatus:
        return derive_status(
            source_id, self.flagged_ordinals[source_id], self.effective()
        )

    # -- queue -----------------------------------------------------------------

    def queue(self) -> list[QueueItem]:
        """Candidates to review: heaviest papers first, then by id and ordinal.

        Verdicted candidates never reappear. Once a paper leaves Pending its
        remaining candidates are withheld, unless exhaustive mode keeps the
        queue exhaustive for per-citation measurements.
        """
        effective = self.effective()
        statuses = self.statuses()
        verdicted = {(paper, ordinal) for (paper, ordinal, _) in effective}
        items = []
        for source_id, paper in self.papers.items():
            if not paper["flags"]:
                continue
            if statuses[source_id].state != PENDING and not self.exhaustive:
                continue
            for flag in paper["flags"]:
                if (source_id, flag["ordinal"]) in verdicted:
                    continue
                items.append(
                    QueueItem(
                        source_id=source_id,
                        ordinal=flag["ordinal"],
                        flag_count=len(paper["flags"]),
                        flag=flag,
                    )
                )
        items.sort(key=lambda item: (-item.flag_count, item.source_id, item.ordinal))
        return items

    # -- verdict submission ------------------------------------------------------

    def _stamp(self, verifier: str) -> str:
        now = datetime.datetime.now(datetime.timezone.utc)
        last = self._verifier_last.get(verifier)
        if last is not None and now <= last:
            now = last + datetime.timedelta(microseconds=1)
        self._verifier_last[verifier] = now
        return now.isoformat()

    def submit(
        self,
        paper: str,
        ordinal: int,
        label: str,
        mismatches: tuple[str, ...] = (),
        not_found: bool = False,
        evidence_url: str | None = None,
        note: str | None = None,
        verifier: str = "anonymous",
    ) -> tuple[Verdict, PaperStatus]:
        """Validate, persist, and apply one verdict; returns the new status."""
        verdict = Verdict(
            paper=paper,
            ordinal=ordinal,
            label=label,
            mismatches=tuple(mismatches),
            not_found=not_found,
            evidence_url=evidence_url,
            note=note,
            verifier=verifier,
            timestamp="",
        )
        check_verdict(verdict, self.flagged_ordinals)
        with self._write_lock:  # one writer: stamp and append atomically
            verdict = dataclasses.replace(verdict, timestamp=self._stamp(verifier))
            self.log.append(verdict)
        return verdict, self.status_of(paper)

    # -- progress -----------------------------------------------------------------

    def progress(self) -> dict:
        """Counts by state plus the live hit-rate table over candidate papers."""
        statuses = self.statuses()
        counts = {PENDING: 0, HALLUCITED: 0, CLEARED: 0}
        rows = {}
        for source_id, paper in self.papers.items():
            flag_count = len(paper["flags"])
            state = statuses[source_id].state
            if flag_count == 0:
                continue
            counts[state] += 1
            rows[source_id] = (flag_count, state == HALLUCITED)
        table: list[HitRateRow] = []
        if rows:
            top_bin = max(1, min(9, max(count for count, _ in rows.values())))
            table = hit_rate_table(rows, top_bin=top_bin)
        return {"counts": counts, "hit_rate": table}
