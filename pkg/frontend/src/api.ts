// Typed client for the triage JSON API. Every response must announce the
// wire schema this client was written against; anything else is a hard stop
// rather than a silent misread.

export const SCHEMA_HEADER = "x-hallucheck-schema";
export const SCHEMA_VERSION = "1";

export interface NearMatch {
  record_id: string;
  score: number;
  title: string | null;
  url: string | null;
}

export interface QueueItem {
  paper: string;
  ordinal: number;
  raw: string;
  kind: string;
  flag_count: number;
  cited_title: string | null;
  near_matches: NearMatch[];
  db_coverage_note: string | null;
  external_note: string | null;
}

export type VerdictLabel = "Exists" | "HalluCitation" | "Unsure";

export interface VerdictDraft {
  paper: string;
  ordinal: number;
  label: VerdictLabel;
  mismatches: string[];
  not_found: boolean;
  evidence_url: string | null;
  note: string | null;
  verifier: string;
}

export interface VerdictRecord extends VerdictDraft {
  timestamp: string;
}

export interface PaperStatus {
  source_id: string;
  state: "Pending" | "HalluCited" | "Cleared";
  skipped_ordinals: number[];
}

export interface VerdictAck {
  verdict: VerdictRecord;
  status: PaperStatus;
}

export interface PaperDetail {
  paper: Record<string, unknown>;
  status: PaperStatus;
  verdicts: VerdictRecord[];
}

export interface HitRateRow {
  freq_bin: string;
  num_candidates: number;
  cum_candidates: number;
  num_hallucited: number;
  cum_hallucited: number;
  hit_rate: number | null;
  cum_hit_rate: number | null;
  hit_rate_pct: string;
  cum_hit_rate_pct: string;
}

export interface Progress {
  pending: number;
  hallucited: number;
  cleared: number;
  hit_rate: HitRateRow[];
}

export interface SearchLink {
  label: string;
  url: string;
}

// Structural subset of a fetch Response; the real fetch satisfies it, and
// tests satisfy it with an in-memory server.
export interface FetchResponse {
  status: number;
  headers: { get(name: string): string | null };
  json(): Promise<unknown>;
}

export interface FetchInit {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

export type FetchFn = (url: string, init?: FetchInit) => Promise<FetchResponse>;

/** The server rejected the request; `reason` is its machine-readable code. */
export class ApiError extends Error {
  constructor(
    readonly reason: string,
    readonly detail: string,
    readonly status: number,
  ) {
    super(detail || reason);
    this.name = "ApiError";
  }
}

/** The server speaks a wire schema this client does not. */
export class SchemaMismatchError extends Error {
  constructor(got: string | null) {
    super(
      `server announced schema ${got === null ? "(none)" : got}, ` +
        `this client requires ${SCHEMA_VERSION}`,
    );
    this.name = "SchemaMismatchError";
  }
}

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchFn,
    private readonly base = "",
  ) {}

  private async request(path: string, init?: FetchInit): Promise<unknown> {
    const res = await this.fetchFn(this.base + path, init);
    const schema = res.headers.get(SCHEMA_HEADER);
    if (schema !== SCHEMA_VERSION) {
      throw new SchemaMismatchError(schema);
    }
    const body = await res.json();
    if (res.status >= 400) {
      const err = body as { reason?: string; detail?: string };
      throw new ApiError(err.reason ?? "error", err.detail ?? "", res.status);
    }
    return body;
  }

  queue(): Promise<QueueItem[]> {
    return this.request("/api/queue") as Promise<QueueItem[]>;
  }

  paper(sourceId: string): Promise<PaperDetail> {
    return this.request(
      `/api/papers/${encodeURIComponent(sourceId)}`,
    ) as Promise<PaperDetail>;
  }

  progress(): Promise<Progress> {
    return this.request("/api/progress") as Promise<Progress>;
  }

  mismatchAttributes(): Promise<string[]> {
    return this.request("/api/mismatch-attributes") as Promise<string[]>;
  }

  async searchLinks(paper: string, ordinal: number): Promise<SearchLink[]> {
    const body = (await this.request(
      `/api/search-links/${encodeURIComponent(paper)}/${ordinal}`,
    )) as { links: SearchLink[] };
    return body.links;
  }

  submitVerdict(draft: VerdictDraft): Promise<VerdictAck> {
    return this.request("/api/verdicts", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(draft),
    }) as Promise<VerdictAck>;
  }
}
