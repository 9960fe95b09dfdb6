import { afterEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import { FakeTriageServer, SeedPaper } from "./fake_server.js";

// "zeta" outranks "alpha" by flag count, so the server-sent order is NOT
// alphabetical; a client that re-sorts would be caught by the order test.
function seed(): SeedPaper[] {
  return [
    {
      paper: "zeta",
      flags: [
        {
          ordinal: 0,
          raw: "F. Fabulist. 2022. Quantum pottery analysis. In Proceedings of ACL.",
          kind: "TitleNotFound",
          cited_title: "Quantum pottery analysis",
          near_matches: [
            {
              record_id: "acl:2020.emnlp-main.1",
              score: 0.2264150943396226,
              title: "Neural topic segmentation with hierarchical attention",
              url: null,
            },
          ],
        },
        {
          ordinal: 1,
          raw: "G. Ghost. 2021. Invisible grammars. In Proceedings of EMNLP.",
          kind: "TitleNotFound",
          cited_title: "Invisible grammars",
        },
        {
          ordinal: 2,
          raw: "H. Hoax. 2023. Imaginary corpora. arXiv preprint arXiv:9999.00001.",
          kind: "IdentifierNotFound",
          cited_title: "Imaginary corpora",
        },
      ],
    },
    {
      paper: "alpha",
      flags: [
        {
          ordinal: 0,
          raw: "I. Inventor. 2020. Fictional embeddings. In Proceedings of NAACL.",
          kind: "TitleNotFound",
          cited_title: "Fictional embeddings",
        },
      ],
    },
  ];
}

const mounted: App[] = [];

async function mount(server: FakeTriageServer): Promise<{ app: App; root: HTMLElement }> {
  const root = document.createElement("div");
  document.body.append(root);
  const app = new App(root, new ApiClient(server.fetch), "tester");
  mounted.push(app);
  await app.start();
  return { app, root };
}

afterEach(() => {
  for (const app of mounted.splice(0)) {
    app.dispose();
  }
  document.body.replaceChildren();
});

function rows(root: HTMLElement): [string, string][] {
  return [...root.querySelectorAll(".queue-row")].map((row) => [
    row.getAttribute("data-paper")!,
    row.getAttribute("data-ordinal")!,
  ]);
}

function selectedRow(root: HTMLElement): [string, string] | null {
  const row = root.querySelector(".queue-row.selected");
  return row === null
    ? null
    : [row.getAttribute("data-paper")!, row.getAttribute("data-ordinal")!];
}

function press(key: string): void {
  document.dispatchEvent(
    new KeyboardEvent("keydown", { key, bubbles: true, cancelable: true }),
  );
}

function click(root: HTMLElement, selector: string): void {
  const node = root.querySelector(selector);
  if (!(node instanceof HTMLElement)) throw new Error(`no element ${selector}`);
  node.click();
}

function submitButton(root: HTMLElement): HTMLButtonElement {
  return root.querySelector("#submit") as HTMLButtonElement;
}

function tally(root: HTMLElement): string {
  return root.querySelector("#tally")!.textContent ?? "";
}

describe("queue rendering", () => {
  it("renders flagged citations exactly in server order", async () => {
    const server = new FakeTriageServer(seed());
    const { root } = await mount(server);
    expect(rows(root)).toEqual([
      ["zeta", "0"],
      ["zeta", "1"],
      ["zeta", "2"],
      ["alpha", "0"],
    ]);
    expect(selectedRow(root)).toEqual(["zeta", "0"]);
    expect(tally(root)).toBe("Pending 2 · HalluCited 0 · Cleared 0");
  });

  it("shows the server's similarity scores verbatim, never its own", async () => {
    const { root } = await mount(new FakeTriageServer(seed()));
    const score = root.querySelector("#near-matches .score")!.textContent;
    expect(score).toBe((0.2264150943396226).toFixed(3));
    const detail = root.querySelector("#detail h2")!.textContent ?? "";
    expect(detail).toContain("zeta");
    expect(detail).toContain("TitleNotFound");
  });

  it("offers search links fetched from the server for the selected flag", async () => {
    const { root } = await mount(new FakeTriageServer(seed()));
    const labels = [...root.querySelectorAll("#search-links a")].map(
      (a) => a.textContent,
    );
    expect(labels).toEqual(["Google Scholar", "DBLP", "OpenAlex"]);
  });
});

describe("verdict form rule", () => {
  it("keeps HalluCitation submission locked until two mismatches or not-found", async () => {
    const { root } = await mount(new FakeTriageServer(seed()));
    press("2"); // HalluCitation
    expect(submitButton(root).disabled).toBe(true);
    expect(root.querySelector("#rule-hint")!.textContent).toContain("two mismatched");

    click(root, "#mismatch-title");
    expect(submitButton(root).disabled).toBe(true);

    click(root, "#mismatch-year");
    expect(submitButton(root).disabled).toBe(false);

    click(root, "#mismatch-title"); // back to one mismatch
    expect(submitButton(root).disabled).toBe(true);

    click(root, "#not-found");
    expect(submitButton(root).disabled).toBe(false);
  });

  it("unlocks immediately for Exists and Unsure", async () => {
    const { root } = await mount(new FakeTriageServer(seed()));
    expect(submitButton(root).disabled).toBe(true); // no label chosen yet
    press("1");
    expect(submitButton(root).disabled).toBe(false);
    press("3");
    expect(submitButton(root).disabled).toBe(false);
  });

  it("resets the draft when moving to another queue item", async () => {
    const { root } = await mount(new FakeTriageServer(seed()));
    press("2");
    click(root, "#not-found");
    expect(submitButton(root).disabled).toBe(false);
    press("j");
    press("k");
    expect(submitButton(root).disabled).toBe(true);
  });
});

describe("verdict effects", () => {
  it("a HalluCitation verdict removes the paper's sibling rows and bumps the tally", async () => {
    const server = new FakeTriageServer(seed());
    const { app, root } = await mount(server);
    expect(tally(root)).toContain("HalluCited 0");

    press("2");
    click(root, "#not-found");
    click(root, "#submit");
    await app.settled();

    expect(rows(root)).toEqual([["alpha", "0"]]); // zeta #1 and #2 left with #0
    expect(tally(root)).toBe("Pending 1 · HalluCited 1 · Cleared 0");
    expect(root.querySelector("#notice")!.textContent).toContain(
      "recorded HalluCitation for zeta #0",
    );
  });

  it("an Exists verdict removes only the verdicted row", async () => {
    const server = new FakeTriageServer(seed());
    const { app, root } = await mount(server);
    press("1");
    press("Enter");
    await app.settled();
    expect(rows(root)).toEqual([
      ["zeta", "1"],
      ["zeta", "2"],
      ["alpha", "0"],
    ]);
    expect(tally(root)).toContain("Pending 2"); // zeta still has open flags
  });

  it("clearing a paper's only flag retires the paper and shows the hit rate", async () => {
    const server = new FakeTriageServer([seed()[1]!]); // alpha alone
    const { app, root } = await mount(server);
    press("1");
    press("Enter");
    await app.settled();
    expect(rows(root)).toEqual([]);
    expect(root.querySelector("#queue .empty")!.textContent).toContain("queue empty");
    expect(tally(root)).toBe("Pending 0 · HalluCited 0 · Cleared 1");
    expect(root.querySelector("#hit-rate")!.textContent).toContain("hit rate so far 0.0%");
  });

  it("surfaces server-side errors in the notice area", async () => {
    const server = new FakeTriageServer(seed());
    const { app, root } = await mount(server);
    server.dropSchemaHeaderOnce = true;
    press("j"); // triggers a search-link fetch that will fail the schema check
    await app.settled();
    expect(root.querySelector("#notice")!.textContent).toContain("schema");
  });
});

describe("keyboard navigation", () => {
  it("j and k walk the queue without leaving its bounds", async () => {
    const { root } = await mount(new FakeTriageServer(seed()));
    expect(selectedRow(root)).toEqual(["zeta", "0"]);
    press("j");
    expect(selectedRow(root)).toEqual(["zeta", "1"]);
    press("ArrowDown");
    press("ArrowDown");
    expect(selectedRow(root)).toEqual(["alpha", "0"]);
    press("j"); // already at the end
    expect(selectedRow(root)).toEqual(["alpha", "0"]);
    press("k");
    press("ArrowUp");
    press("k");
    press("k"); // already at the start
    expect(selectedRow(root)).toEqual(["zeta", "0"]);
  });
});

describe("durability", () => {
  it("verdicts persist across a full page reload", async () => {
    const server = new FakeTriageServer(seed());
    const first = await mount(server);
    press("2");
    click(first.root, "#not-found");
    click(first.root, "#submit");
    await first.app.settled();
    expect(tally(first.root)).toContain("HalluCited 1");

    // a reload tears the page down and boots a fresh client against the
    // same server state
    first.app.dispose();
    first.root.remove();
    const second = await mount(server);
    expect(rows(second.root)).toEqual([["alpha", "0"]]);
    expect(tally(second.root)).toBe("Pending 1 · HalluCited 1 · Cleared 0");
  });
});
