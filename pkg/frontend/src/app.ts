// The triage screen: a queue of flagged citations (rendered exactly in the
// order the server returns them — ranking is the server's job, as is every
// similarity score shown here), a detail pane with the evidence for the
// selected flag, and a verdict form that enforces the submission rule
// client-side: a HalluCitation verdict needs "no corresponding work found"
// or at least two mismatched attributes before the submit control unlocks.

import {
  ApiClient,
  ApiError,
  Progress,
  QueueItem,
  SearchLink,
  VerdictDraft,
  VerdictLabel,
} from "./api.js";

const LABELS: readonly VerdictLabel[] = ["Exists", "HalluCitation", "Unsure"];

interface Draft {
  label: VerdictLabel | null;
  mismatches: Set<string>;
  notFound: boolean;
  evidence: string;
  note: string;
}

function freshDraft(): Draft {
  return { label: null, mismatches: new Set(), notFound: false, evidence: "", note: "" };
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

export class App {
  private items: QueueItem[] = [];
  private attributes: string[] = [];
  private progress: Progress | null = null;
  private links: SearchLink[] = [];
  private selected = 0;
  private draft: Draft = freshDraft();
  private notice = "";
  private inflight: Promise<void> = Promise.resolve();
  private readonly onKeydown = (event: KeyboardEvent) => this.handleKey(event);

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly verifier = "anonymous",
  ) {}

  async start(): Promise<void> {
    [this.items, this.progress, this.attributes] = await Promise.all([
      this.api.queue(),
      this.api.progress(),
      this.api.mismatchAttributes(),
    ]);
    this.root.ownerDocument.addEventListener("keydown", this.onKeydown);
    this.render();
    await this.refreshLinks();
  }

  dispose(): void {
    this.root.ownerDocument.removeEventListener("keydown", this.onKeydown);
    this.root.replaceChildren();
  }

  /** Resolves once every user-triggered request so far has finished. */
  settled(): Promise<void> {
    return this.inflight;
  }

  private current(): QueueItem | null {
    return this.items[this.selected] ?? null;
  }

  private enqueue(work: () => Promise<void>): void {
    this.inflight = this.inflight.then(work).catch((err) => {
      this.notice = err instanceof Error ? err.message : String(err);
      this.render();
    });
  }

  // --- interactions ---------------------------------------------------------

  private select(index: number): void {
    const clamped = Math.max(0, Math.min(index, this.items.length - 1));
    if (clamped === this.selected && this.items.length > 0) return;
    this.selected = clamped;
    this.draft = freshDraft();
    this.notice = "";
    this.links = [];
    this.render();
    this.enqueue(() => this.refreshLinks());
  }

  private async refreshLinks(): Promise<void> {
    const item = this.current();
    if (item === null) return;
    const links = await this.api.searchLinks(item.paper, item.ordinal);
    if (this.current() === item) {
      this.links = links;
      this.render();
    }
  }

  canSubmit(): boolean {
    if (this.current() === null || this.draft.label === null) return false;
    if (this.draft.label !== "HalluCitation") return true;
    return this.draft.notFound || this.draft.mismatches.size >= 2;
  }

  private submit(): void {
    const item = this.current();
    if (item === null || !this.canSubmit() || this.draft.label === null) return;
    const body: VerdictDraft = {
      paper: item.paper,
      ordinal: item.ordinal,
      label: this.draft.label,
      mismatches: [...this.draft.mismatches],
      not_found: this.draft.notFound,
      evidence_url: this.draft.evidence.trim() || null,
      note: this.draft.note.trim() || null,
      verifier: this.verifier,
    };
    this.enqueue(async () => {
      const ack = await this.api.submitVerdict(body);
      // The server decides what leaves the queue: the verdicted flag always
      // does, and when the paper's state leaves Pending its remaining rows
      // go with it (early-stop). Progress is re-read, never counted locally.
      this.items = this.items.filter((queued) => {
        if (queued === item) return false;
        if (queued.paper === ack.status.source_id && ack.status.state !== "Pending") {
          return false;
        }
        return true;
      });
      this.progress = await this.api.progress();
      this.selected = Math.max(0, Math.min(this.selected, this.items.length - 1));
      this.draft = freshDraft();
      this.links = [];
      this.notice = `recorded ${ack.verdict.label} for ${ack.verdict.paper} #${ack.verdict.ordinal}`;
      this.render();
      await this.refreshLinks();
    });
  }

  private handleKey(event: KeyboardEvent): void {
    const target = event.target;
    if (
      target instanceof HTMLInputElement &&
      (target.type === "text" || target.type === "url")
    ) {
      return; // typing in a text field must not trigger shortcuts
    }
    if (target instanceof HTMLTextAreaElement) return;
    switch (event.key) {
      case "j":
      case "ArrowDown":
        this.select(this.selected + 1);
        event.preventDefault();
        break;
      case "k":
      case "ArrowUp":
        this.select(this.selected - 1);
        event.preventDefault();
        break;
      case "1":
      case "2":
      case "3": {
        const label = LABELS[Number(event.key) - 1];
        if (label !== undefined) this.setLabel(label);
        event.preventDefault();
        break;
      }
      case "n":
        this.draft.notFound = !this.draft.notFound;
        this.render();
        event.preventDefault();
        break;
      case "Enter":
        this.submit();
        event.preventDefault();
        break;
    }
  }

  private setLabel(label: VerdictLabel): void {
    this.draft.label = label;
    this.render();
  }

  private toggleMismatch(attribute: string): void {
    if (this.draft.mismatches.has(attribute)) {
      this.draft.mismatches.delete(attribute);
    } else {
      this.draft.mismatches.add(attribute);
    }
    this.render();
  }

  // --- rendering ------------------------------------------------------------

  private render(): void {
    this.root.replaceChildren(
      this.renderProgress(),
      this.renderNotice(),
      el("main", { class: "layout" }, [this.renderQueue(), this.renderDetail()]),
      el("footer", { class: "keys" }, [
        "keys: j/k or arrows move · 1 Exists · 2 HalluCitation · 3 Unsure · n not-found · Enter submit",
      ]),
    );
  }

  private renderProgress(): HTMLElement {
    const p = this.progress;
    const summary =
      p === null
        ? "loading…"
        : `Pending ${p.pending} · HalluCited ${p.hallucited} · Cleared ${p.cleared}`;
    const header = el("header", { id: "progress" }, [
      el("h1", {}, ["hallucheck triage"]),
      el("span", { id: "tally" }, [summary]),
    ]);
    const overall = p?.hit_rate.at(-1);
    if (overall !== undefined) {
      header.append(
        el("span", { id: "hit-rate" }, [
          ` · hit rate so far ${overall.cum_hit_rate_pct}%`,
        ]),
      );
    }
    return header;
  }

  private renderNotice(): HTMLElement {
    return el("div", { id: "notice", role: "status" }, [this.notice]);
  }

  private renderQueue(): HTMLElement {
    if (this.items.length === 0) {
      return el("section", { id: "queue" }, [
        el("p", { class: "empty" }, ["queue empty — nothing left to verify"]),
      ]);
    }
    const rows = this.items.map((item, index) => {
      const row = el(
        "li",
        {
          class: index === this.selected ? "queue-row selected" : "queue-row",
          "data-paper": item.paper,
          "data-ordinal": String(item.ordinal),
        },
        [
          el("span", { class: "cell paper" }, [item.paper]),
          el("span", { class: "cell ordinal" }, [`#${item.ordinal}`]),
          el("span", { class: "cell kind" }, [item.kind]),
          el("span", { class: "cell title" }, [item.cited_title ?? "(no title extracted)"]),
          el("span", { class: "cell count" }, [`${item.flag_count} flags`]),
        ],
      );
      row.addEventListener("click", () => this.select(index));
      return row;
    });
    return el("section", { id: "queue" }, [el("ol", {}, rows)]);
  }

  private renderDetail(): HTMLElement {
    const item = this.current();
    if (item === null) return el("section", { id: "detail" });
    const near = item.near_matches.map((match) =>
      el("li", { class: "near-match" }, [
        el("span", { class: "score" }, [match.score.toFixed(3)]),
        " ",
        match.url === null
          ? el("span", {}, [match.title ?? match.record_id])
          : el("a", { href: match.url }, [match.title ?? match.record_id]),
        el("span", { class: "record-id" }, [` (${match.record_id})`]),
      ]),
    );
    const links = this.links.map((link) =>
      el("li", {}, [el("a", { href: link.url, target: "_blank", rel: "noreferrer" }, [link.label])]),
    );
    const notes: HTMLElement[] = [];
    if (item.db_coverage_note !== null) {
      notes.push(el("p", { class: "note coverage" }, [item.db_coverage_note]));
    }
    if (item.external_note !== null) {
      notes.push(el("p", { class: "note external" }, [item.external_note]));
    }
    return el("section", { id: "detail" }, [
      el("h2", {}, [`${item.paper} · citation #${item.ordinal} · ${item.kind}`]),
      el("blockquote", { id: "raw" }, [item.raw]),
      ...notes,
      el("h3", {}, ["nearest indexed titles"]),
      el("ul", { id: "near-matches" }, near),
      el("h3", {}, ["look it up"]),
      el("ul", { id: "search-links" }, links),
      this.renderForm(),
    ]);
  }

  private renderForm(): HTMLElement {
    const labelRow = el(
      "div",
      { class: "labels" },
      LABELS.map((label, i) => {
        const input = el("input", {
          type: "radio",
          name: "label",
          value: label,
          id: `label-${label}`,
        });
        input.checked = this.draft.label === label;
        input.addEventListener("change", () => this.setLabel(label));
        return el("label", { for: `label-${label}` }, [input, ` ${i + 1} ${label}`]);
      }),
    );
    const mismatchBoxes = this.attributes.map((attribute) => {
      const input = el("input", {
        type: "checkbox",
        name: "mismatch",
        value: attribute,
        id: `mismatch-${attribute}`,
      });
      input.checked = this.draft.mismatches.has(attribute);
      input.addEventListener("change", () => this.toggleMismatch(attribute));
      return el("label", { for: `mismatch-${attribute}` }, [input, ` ${attribute}`]);
    });
    const notFound = el("input", { type: "checkbox", id: "not-found" });
    notFound.checked = this.draft.notFound;
    notFound.addEventListener("change", () => {
      this.draft.notFound = notFound.checked;
      this.render();
    });
    const evidence = el("input", {
      type: "url",
      id: "evidence",
      placeholder: "evidence URL (optional)",
    });
    evidence.value = this.draft.evidence;
    evidence.addEventListener("input", () => {
      this.draft.evidence = evidence.value;
    });
    const note = el("input", { type: "text", id: "note", placeholder: "note (optional)" });
    note.value = this.draft.note;
    note.addEventListener("input", () => {
      this.draft.note = note.value;
    });
    const submit = el("button", { id: "submit", type: "button" }, ["submit verdict"]);
    submit.disabled = !this.canSubmit();
    submit.addEventListener("click", () => this.submit());
    const hint =
      this.draft.label === "HalluCitation" && !this.canSubmit()
        ? "HalluCitation needs “no corresponding work found” or at least two mismatched attributes"
        : "";
    return el("form", { id: "verdict-form" }, [
      labelRow,
      el("fieldset", { class: "mismatches" }, [
        el("legend", {}, ["mismatched attributes"]),
        ...mismatchBoxes,
      ]),
      el("label", { for: "not-found" }, [notFound, " no corresponding work found"]),
      evidence,
      note,
      submit,
      el("span", { id: "rule-hint" }, [hint]),
    ]);
  }
}
