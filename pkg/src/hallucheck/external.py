"""Optional online lookup of unresolved candidates, cached and rate-limited.

Offline-first: every query goes through a directory-backed cache, and with
networking disabled a cache miss raises OfflineMissError instead of making a
request. Supported services are OpenAlex and DBLP, each through its public
search endpoint (an identifier lookup uses the same endpoint with the
identifier as the query — both services index identifiers as search text).
External evidence only ever annotates a flag; it never clears one.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import requests

from .errors import (
    NetworkError,
    OfflineMissError,
    ResponseParseError,
    ServiceError,
)
from .matching import CandidateFlag, normalize_title, similarity

CACHE_SCHEMA_VERSION = 1
_MAX_ATTEMPTS = 3  # 1 request + 2 retries on transport failure
_RESULTS_PER_QUERY = 10

SERVICES = ("openalex", "dblp")
QUERY_KINDS = ("title_search", "id_lookup")

# transport(url, params) -> (http status, body text)
Transport = Callable[[str, dict], tuple[int, str]]


@dataclass(frozen=True)
class ExternalQuery:
    """One request to one service, normalized so equal queries cache-hit."""

    service: str
    kind: str
    payload: str

    def __post_init__(self) -> None:
        if self.service not in SERVICES:
            raise ValueError(f"unknown service: {self.service!r}")
        if self.kind not in QUERY_KINDS:
            raise ValueError(f"unknown query kind: {self.kind!r}")
        if not self.payload:
            raise ValueError("query payload must be nonempty")

    def cache_key(self) -> str:
        raw = f"{self.service}|{self.kind}|{self.payload}"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ExternalHit:
    """One record returned by a service, reduced to a neutral shape."""

    title: str
    year: int | None = None
    url: str | None = None
    external_id: str | None = None


@dataclass(frozen=True)
class ExternalResult:
    """The hits for one query. An empty hits list is a valid "not found"."""

    query: ExternalQuery
    hits: tuple[ExternalHit, ...]
    fetched_at: str
    from_cache: bool = False


class CacheStore:
    """Directory-backed query cache: one JSON file per query digest."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, query: ExternalQuery) -> Path:
        return self.directory / f"{query.cache_key()}.json"

    def get(self, query: ExternalQuery) -> ExternalResult | None:
        path = self._path(query)
        if not path.exists():
            return None
        data = json.loads(path.read_text(encoding="utf-8"))
        if data.get("schema") != CACHE_SCHEMA_VERSION:
            return None  # unreadable generation: treat as a miss
        return ExternalResult(
            query=query,
            hits=tuple(ExternalHit(**hit) for hit in data["hits"]),
            fetched_at=data["fetched_at"],
            from_cache=True,
        )

    def put(self, query: ExternalQuery, result: ExternalResult) -> None:
        path = self._path(query)
        if path.exists():
            return  # entries are immutable once written
        blob = {
            "schema": CACHE_SCHEMA_VERSION,
            "service": query.service,
            "kind": query.kind,
            "payload": query.payload,
            "fetched_at": result.fetched_at,
            "hits": [asdict(hit) for hit in result.hits],
        }
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(blob, sort_keys=True), encoding="utf-8")
        tmp.replace(path)


class RateLimiter:
    """Per-service minimum spacing between requests.

    Clock and sleep are injectable so the spacing contract is testable
    without real waiting.
    """

    def __init__(
        self,
        interval_ms: int = 1000,
        now: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.interval = interval_ms / 1000.0
        self._now = now
        self._sleep = sleep
        self._last: dict[str, float] = {}
        self._lock = threading.Lock()

    def wait(self, service: str) -> None:
        while True:
            with self._lock:
                last = self._last.get(service)
                current = self._now()
                delay = 0.0 if last is None else last + self.interval - current
                if delay <= 0:
                    self._last[service] = current
                    return
            self._sleep(delay)


def _requests_transport(url: str, params: dict) -> tuple[int, str]:
    try:
        response = requests.get(
            url, params=params, timeout=20, headers={"User-Agent": "hallucheck/0.1"}
        )
    except requests.RequestException as exc:
        raise NetworkError(str(exc)) from exc
    return response.status_code, response.text


def _endpoint(query: ExternalQuery) -> tuple[str, dict]:
    if query.service == "openalex":
        return (
            "https://api.openalex.org/works",
            {"search": query.payload, "per-page": str(_RESULTS_PER_QUERY)},
        )
    return (
        "https://dblp.org/search/publ/api",
        {"q": query.payload, "format": "json", "h": str(_RESULTS_PER_QUERY)},
    )


def _parse_openalex(body: str) -> tuple[ExternalHit, ...]:
    data = json.loads(body)
    results = data["results"]
    hits = []
    for item in results:
        title = item.get("display_name") or item.get("title")
        if not isinstance(title, str) or not title.strip():
            continue
        year = item.get("publication_year")
        hits.append(
            ExternalHit(
                title=title.strip(),
                year=year if isinstance(year, int) else None,
                url=item.get("id") if isinstance(item.get("id"), str) else None,
                external_id=item.get("id") if isinstance(item.get("id"), str) else None,
            )
        )
    return tuple(hits)


def _parse_dblp(body: str) -> tuple[ExternalHit, ...]:
    data = json.loads(body)
    hit_block = data["result"]["hits"]
    raw_hits = hit_block.get("hit", [])
    hits = []
    for item in raw_hits:
        info = item.get("info", {})
        title = info.get("title")
        if not isinstance(title, str) or not title.strip():
            continue
        year = info.get("year")
        hits.append(
            ExternalHit(
                title=title.strip(),
                year=int(year) if isinstance(year, str) and year.isdigit() else None,
                url=info.get("ee") or info.get("url"),
                external_id=info.get("key"),
            )
        )
    return tuple(hits)


def _parse_hits(service: str, body: str) -> tuple[ExternalHit, ...]:
    parser = _parse_openalex if service == "openalex" else _parse_dblp
    try:
        return parser(body)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ResponseParseError(service, f"unparseable response body ({exc})") from exc


def search_external(
    query: ExternalQuery,
    cache: CacheStore,
    limiter: RateLimiter,
    *,
    online: bool = True,
    transport: Transport | None = None,
) -> ExternalResult:
    """Answer a query from cache, or via one rate-limited request when online.

    The network result is cached before returning, so a byte-identical query
    is sent at most once per cache directory.
    """
    cached = cache.get(query)
    if cached is not None:
        return cached
    if not online:
        raise OfflineMissError(
            f"{query.service}/{query.kind}: no cached answer and networking is disabled"
        )
    send = transport or _requests_transport
    url, params = _endpoint(query)
    attempts = 0
    while True:
        limiter.wait(query.service)
        attempts += 1
        try:
            status, body = send(url, params)
            break
        except NetworkError as exc:
            if attempts >= _MAX_ATTEMPTS:
                raise NetworkError(f"{query.service}: {exc} (after {attempts} attempts)") from exc
    if not 200 <= status < 300:
        raise ServiceError(query.service, status, excerpt=body[:120])
    hits = _parse_hits(query.service, body)
    result = ExternalResult(
        query=query,
        hits=hits,
        fetched_at=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        from_cache=False,
    )
    cache.put(query, result)
    return result


NOTE_RESOLVABLE = "externally resolvable"
NOTE_NO_MATCH = "no external match"
NOTE_OFFLINE = "unchecked (offline)"

_ENRICHABLE_KINDS = ("TitleNotFound", "IdentifierNotFound")


def enrich_flags(
    flags: list[CandidateFlag],
    cache: CacheStore,
    limiter: RateLimiter,
    *,
    online: bool = True,
    threshold: float = 0.9,
    transport: Transport | None = None,
) -> None:
    """Annotate every externally checkable flag in place; others untouched."""
    for flag in flags:
        if flag.kind in _ENRICHABLE_KINDS:
            confirm_candidate(
                flag,
                cache,
                limiter,
                online=online,
                threshold=threshold,
                transport=transport,
            )


def confirm_candidate(
    flag: CandidateFlag,
    cache: CacheStore,
    limiter: RateLimiter,
    *,
    online: bool = True,
    threshold: float = 0.9,
    transport: Transport | None = None,
) -> CandidateFlag:
    """Attach external evidence to an unresolved flag. Never clears it.

    Queries both services for the cited title (or the identifier, for
    identifier flags without a usable title), scores each returned title
    against the citation, and records the strongest evidence as a note plus
    scored hits. Lookup errors become part of the note; the flag survives.
    """
    if flag.kind not in _ENRICHABLE_KINDS:
        raise ValueError(f"flag kind {flag.kind!r} is not externally checkable")
    if flag.cited_title:
        kind, payload = "title_search", flag.cited_title
    elif flag.identifier is not None:
        kind, payload = "id_lookup", flag.identifier.identifier
    else:
        flag.external_note = NOTE_NO_MATCH
        flag.external_hits = ()
        return flag
    query_norm = normalize_title(flag.cited_title or "")
    scored: list[tuple[str, float]] = []
    notes: list[str] = []
    went_offline = False
    for service in SERVICES:
        query = ExternalQuery(service=service, kind=kind, payload=payload)
        try:
            result = search_external(
                query, cache, limiter, online=online, transport=transport
            )
        except OfflineMissError:
            went_offline = True
            continue
        except (NetworkError, ServiceError, ResponseParseError) as exc:
            notes.append(f"{service} lookup failed: {exc}")
            continue
        for hit in result.hits:
            score = similarity(query_norm, normalize_title(hit.title)) if query_norm else 0.0
            scored.append((hit.title, score))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    flag.external_hits = tuple(scored[:_RESULTS_PER_QUERY])
    # Without a cited title to compare against, an identifier lookup counts
    # as resolved when the identifier returns any record at all.
    resolved = (
        scored[0][1] >= threshold if query_norm else bool(scored)
    ) if scored else False
    if went_offline and not scored:
        flag.external_note = NOTE_OFFLINE
    elif resolved:
        flag.external_note = NOTE_RESOLVABLE
    else:
        flag.external_note = NOTE_NO_MATCH
    if notes:
        flag.external_note += "; " + "; ".join(notes)
    return flag
