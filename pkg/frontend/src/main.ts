import { ApiClient } from "./api.js";
import { App } from "./app.js";

declare global {
  interface Window {
    /** Optional API origin override; default is same-origin. */
    HALLUCHECK_API?: string;
  }
}

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app mount point");
}
const api = new ApiClient((url, init) => fetch(url, init), window.HALLUCHECK_API ?? "");
const verifier = new URLSearchParams(window.location.search).get("verifier") ?? "anonymous";
new App(root, api, verifier).start().catch((err) => {
  root.replaceChildren(
    Object.assign(document.createElement("pre"), { textContent: String(err) }),
  );
});
