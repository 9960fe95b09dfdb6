"""JSON API over a scan report and its verdict log.

Every response carries the schema version header. The report is read-only;
the only mutation is appending verdicts, which the triage session serializes
and makes durable before the request is acknowledged.
"""

from __future__ import annotations

from urllib.parse import quote_plus

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .analytics import percent
from .errors import VerdictValidationError
from .references import _extract_identifiers
from .scanning import load_report
from .triage import MISMATCH_ATTRIBUTES, TriageSession

SCHEMA_HEADER = "x-hallucheck-schema"
SCHEMA_VERSION = "1"

_NEAR_MATCH_LIMIT = 5


class NearMatch(BaseModel):
    record_id: str
    score: float
    title: str | None = None
    url: str | None = None


class QueueItem(BaseModel):
    paper: str
    ordinal: int
    raw: str
    kind: str
    flag_count: int
    cited_title: str | None = None
    near_matches: list[NearMatch] = Field(default_factory=list)
    db_coverage_note: str | None = None
    external_note: str | None = None


class VerdictIn(BaseModel):
    paper: str
    ordinal: int
    label: str
    mismatches: list[str] = Field(default_factory=list)
    not_found: bool = False
    evidence_url: str | None = None
    note: str | None = None
    verifier: str = "anonymous"


class VerdictOut(BaseModel):
    paper: str
    ordinal: int
    label: str
    mismatches: list[str]
    not_found: bool
    evidence_url: str | None
    note: str | None
    verifier: str
    timestamp: str


class StatusOut(BaseModel):
    source_id: str
    state: str
    skipped_ordinals: list[int]


class VerdictAck(BaseModel):
    verdict: VerdictOut
    status: StatusOut


class PaperDetail(BaseModel):
    paper: dict
    status: StatusOut
    verdicts: list[VerdictOut]


class HitRateRowOut(BaseModel):
    freq_bin: str
    num_candidates: int
    cum_candidates: int
    num_hallucited: int
    cum_hallucited: int
    hit_rate: float | None
    cum_hit_rate: float | None
    hit_rate_pct: str
    cum_hit_rate_pct: str


class Progress(BaseModel):
    pending: int
    hallucited: int
    cleared: int
    hit_rate: list[HitRateRowOut]


class SearchLink(BaseModel):
    label: str
    url: str


class SearchLinks(BaseModel):
    paper: str
    ordinal: int
    links: list[SearchLink]


def _near_matches(flag: dict) -> list[NearMatch]:
    match = flag.get("match")
    if not match:
        return []
    ranked = []
    if match.get("best"):
        ranked.append(match["best"])
    ranked.extend(match.get("runners_up", ()))
    return [NearMatch(**entry) for entry in ranked[:_NEAR_MATCH_LIMIT]]


def _search_links(flag: dict) -> list[SearchLink]:
    """External lookup URLs for the candidate: title searches always,
    identifier resolvers when the entry carries one."""
    links = []
    query = flag.get("cited_title") or flag.get("raw", "")[:120]
    if query:
        quoted = quote_plus(query)
        links += [
            SearchLink(
                label="Google Scholar",
                url=f"https://scholar.google.com/scholar?q={quoted}",
            ),
            SearchLink(label="DBLP", url=f"https://dblp.org/search?q={quoted}"),
            SearchLink(
                label="OpenAlex", url=f"https://api.openalex.org/works?search={quoted}"
            ),
        ]
    ids = _extract_identifiers(flag.get("raw", ""))
    if ids is not None:
        if ids.arxiv_id is not None:
            links.append(
                SearchLink(
                    label="arXiv", url=f"https://arxiv.org/abs/{ids.arxiv_id.base}"
                )
            )
        if ids.doi is not None:
            links.append(SearchLink(label="DOI", url=f"https://doi.org/{ids.doi}"))
        if ids.acl_id is not None:
            links.append(
                SearchLink(
                    label="ACL Anthology", url=f"https://aclanthology.org/{ids.acl_id}"
                )
            )
        if ids.url is not None:
            links.append(SearchLink(label="Cited URL", url=ids.url))
    return links


def _verdict_out(verdict) -> VerdictOut:
    return VerdictOut(**verdict.to_json())


def _status_out(status) -> StatusOut:
    return StatusOut(
        source_id=status.source_id,
        state=status.state,
        skipped_ordinals=list(status.skipped_ordinals),
    )


def create_app(report_path, log_path, exhaustive: bool = False) -> FastAPI:
    """Build the API app bound to one report file and one verdict log."""
    session = TriageSession(load_report(report_path), log_path, exhaustive=exhaustive)
    app = FastAPI(title="hallucheck triage", version=SCHEMA_VERSION)
    app.state.session = session

    @app.middleware("http")
    async def schema_header(request, call_next):
        response = await call_next(request)
        response.headers[SCHEMA_HEADER] = SCHEMA_VERSION
        return response

    @app.get("/api/queue", response_model=list[QueueItem])
    def get_queue():
        return [
            QueueItem(
                paper=item.source_id,
                ordinal=item.ordinal,
                raw=item.flag["raw"],
                kind=item.flag["kind"],
                flag_count=item.flag_count,
                cited_title=item.flag.get("cited_title"),
                near_matches=_near_matches(item.flag),
                db_coverage_note=item.flag.get("db_coverage_note"),
                external_note=item.flag.get("external_note"),
            )
            for item in session.queue()
        ]

    @app.get("/api/papers/{source_id}", response_model=PaperDetail)
    def get_paper(source_id: str):
        paper = session.papers.get(source_id)
        if paper is None:
            return JSONResponse(
                status_code=404,
                content={"reason": "unknown_paper", "detail": source_id},
            )
        effective = session.effective()
        verdicts = [
            _verdict_out(verdict)
            for (paper_id, _, _), verdict in sorted(
                effective.items(), key=lambda kv: (kv[0][1], kv[0][2])
            )
            if paper_id == source_id
        ]
        return PaperDetail(
            paper=paper,
            status=_status_out(session.status_of(source_id)),
            verdicts=verdicts,
        )

    @app.post("/api/verdicts", response_model=VerdictAck, status_code=201)
    def post_verdict(body: VerdictIn):
        try:
            verdict, status = session.submit(
                paper=body.paper,
                ordinal=body.ordinal,
                label=body.label,
                mismatches=tuple(body.mismatches),
                not_found=body.not_found,
                evidence_url=body.evidence_url,
                note=body.note,
                verifier=body.verifier,
            )
        except VerdictValidationError as exc:
            return JSONResponse(
                status_code=422,
                content={"reason": exc.reason, "detail": exc.detail},
            )
        return VerdictAck(verdict=_verdict_out(verdict), status=_status_out(status))

    @app.get("/api/progress", response_model=Progress)
    def get_progress():
        progress = session.progress()
        counts = progress["counts"]
        return Progress(
            pending=counts["Pending"],
            hallucited=counts["HalluCited"],
            cleared=counts["Cleared"],
            hit_rate=[
                HitRateRowOut(
                    freq_bin=row.freq_bin,
                    num_candidates=row.num_candidates,
                    cum_candidates=row.cum_candidates,
                    num_hallucited=row.num_hallucited,
                    cum_hallucited=row.cum_hallucited,
                    hit_rate=row.hit_rate,
                    cum_hit_rate=row.cum_hit_rate,
                    hit_rate_pct=percent(row.hit_rate),
                    cum_hit_rate_pct=percent(row.cum_hit_rate),
                )
                for row in progress["hit_rate"]
            ],
        )

    @app.get("/api/search-links/{source_id}/{ordinal}", response_model=SearchLinks)
    def get_search_links(source_id: str, ordinal: int):
        paper = session.papers.get(source_id)
        if paper is None:
            return JSONResponse(
                status_code=404,
                content={"reason": "unknown_paper", "detail": source_id},
            )
        flag = next((f for f in paper["flags"] if f["ordinal"] == ordinal), None)
        if flag is None:
            return JSONResponse(
                status_code=404,
                content={"reason": "unknown_ordinal", "detail": f"{source_id}#{ordinal}"},
            )
        return SearchLinks(
            paper=source_id, ordinal=ordinal, links=_search_links(flag)
        )

    @app.get("/api/mismatch-attributes", response_model=list[str])
    def get_mismatch_attributes():
        return list(MISMATCH_ATTRIBUTES)

    return app
