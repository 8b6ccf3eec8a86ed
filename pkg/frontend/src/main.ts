/** Entry point: wires drag-and-drop, buttons, and overlay controls to the
 * state transitions and re-renders on every change. */

import { ApiClient, bannerText } from "./api.js";
import * as st from "./state.js";
import { render } from "./view.js";

const DEFAULT_BASE_URL = "http://localhost:8000";

export function mount(root: HTMLElement, client?: ApiClient): void {
  const api = client ?? new ApiClient(DEFAULT_BASE_URL);
  let state = st.initialState();
  let file: File | null = null;

  function update(next: st.ViewState): void {
    state = next;
    root.innerHTML = render(state);
    attach();
  }

  function pickFile(f: File): void {
    if (state.imageUrl != null) URL.revokeObjectURL(state.imageUrl);
    file = f;
    update(st.selectImage(state, URL.createObjectURL(f), f.name));
  }

  async function run(
    kind: "predict" | "preprocess",
  ): Promise<void> {
    if (file == null) return;
    const started = st.beginRequest(state);
    if (started == null) return; // one request at a time
    update(started);
    try {
      if (kind === "predict") {
        const p = await api.predict(file, true);
        update(st.predictionReceived(state, p));
      } else {
        const panels = await api.preprocess(file);
        update(st.panelsReceived(state, panels));
      }
    } catch (err) {
      update(st.requestFailed(state, bannerText(err)));
    }
  }

  function attach(): void {
    const drop = root.querySelector<HTMLElement>("#dropzone")!;
    const input = root.querySelector<HTMLInputElement>("#file-input")!;
    drop.addEventListener("click", () => input.click());
    input.addEventListener("change", () => {
      if (input.files?.[0]) pickFile(input.files[0]);
    });
    for (const name of ["dragenter", "dragover"] as const) {
      drop.addEventListener(name, (e) => {
        e.preventDefault();
        drop.classList.add("dragging");
      });
    }
    drop.addEventListener("dragleave", () => drop.classList.remove("dragging"));
    drop.addEventListener("drop", (e) => {
      e.preventDefault();
      drop.classList.remove("dragging");
      const f = e.dataTransfer?.files?.[0];
      if (f) pickFile(f);
    });

    root
      .querySelector("#predict-btn")
      ?.addEventListener("click", () => void run("predict"));
    root
      .querySelector("#preprocess-btn")
      ?.addEventListener("click", () => void run("preprocess"));

    const toggle = root.querySelector<HTMLInputElement>("#overlay-toggle");
    toggle?.addEventListener("change", () =>
      update(st.setOverlayVisible(state, toggle.checked)),
    );
    const alpha = root.querySelector<HTMLInputElement>("#overlay-alpha");
    alpha?.addEventListener("input", () =>
      update(st.setOverlayAlpha(state, Number(alpha.value))),
    );

    const baseUrl = root.querySelector<HTMLInputElement>("#base-url")!;
    baseUrl.value = api.getBaseUrl();
    baseUrl.addEventListener("change", () => api.setBaseUrl(baseUrl.value));
  }

  update(state);
}

declare global {
  interface Window {
    fracturekitMount?: typeof mount;
  }
}

if (typeof document !== "undefined") {
  window.fracturekitMount = mount;
  const root = document.getElementById("app");
  if (root) mount(root);
}
