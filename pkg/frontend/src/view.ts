/** Pure state -> HTML rendering. main.ts mounts this string and attaches
 * event handlers by id; tests assert on the markup directly. */

import { latency, percent, pngDataUrl } from "./format.js";
import { overlayControlsEnabled, type ViewState } from "./state.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function bannerHtml(s: ViewState): string {
  if (s.banner == null) return "";
  return `<div class="banner" role="alert">${esc(s.banner)}</div>`;
}

function resultHtml(s: ViewState): string {
  const p = s.prediction;
  if (p == null) return "";
  const alert = p.label === "fractured" ? " badge-alert" : "";
  const pct = percent(p.confidence);
  return `
    <section class="result">
      <span class="badge${alert}" data-testid="label">${esc(p.label)}</span>
      <div class="confidence">
        <div class="confidence-bar" style="width:${pct}"></div>
        <span data-testid="confidence">${pct}</span>
      </div>
      <span class="latency" data-testid="latency">${latency(p.latency_ms)}</span>
    </section>`;
}

function overlayHtml(s: ViewState): string {
  if (s.imageUrl == null) return "";
  const p = s.prediction;
  const enabled = overlayControlsEnabled(s);
  const heatmap =
    enabled && s.overlayVisible && p?.heatmap
      ? `<img class="heatmap" data-testid="heatmap" alt="Grad-CAM overlay"
            src="${pngDataUrl(p.heatmap)}" style="opacity:${s.overlayAlpha}">`
      : "";
  return `
    <figure class="viewer">
      <img class="radiograph" alt="${esc(s.imageName ?? "selected image")}"
           src="${esc(s.imageUrl)}">
      ${heatmap}
      <div class="overlay-controls">
        <label><input type="checkbox" id="overlay-toggle"
          ${s.overlayVisible ? "checked" : ""} ${enabled ? "" : "disabled"}>
          overlay</label>
        <input type="range" id="overlay-alpha" min="0" max="1" step="0.05"
          value="${s.overlayAlpha}" ${enabled ? "" : "disabled"}>
      </div>
    </figure>`;
}

function panelsHtml(s: ViewState): string {
  if (s.panels == null) return "";
  const captions: Array<[keyof typeof s.panels & string, string]> = [
    ["original", "original"],
    ["enhanced", "contrast enhanced"],
    ["mask", "segmentation mask"],
    ["edges", "edges"],
  ];
  const note = s.panels.degenerate_mask
    ? " (uniform image — mask is degenerate)"
    : "";
  const cells = captions
    .map(
      ([key, caption]) => `
      <figure class="panel">
        <img alt="${caption}" src="${pngDataUrl(s.panels![key] as string)}">
        <figcaption>${caption}${key === "mask" ? note : ""}</figcaption>
      </figure>`,
    )
    .join("");
  return `<section class="panels" data-testid="panels">${cells}</section>`;
}

export function render(s: ViewState): string {
  const busy = s.inFlight ? `<div class="spinner" data-testid="busy"></div>` : "";
  return `
    ${bannerHtml(s)}
    <div id="dropzone" class="dropzone${s.imageUrl ? " has-image" : ""}">
      ${s.imageUrl ? "" : "<p>drag an X-ray here, or click to choose a file</p>"}
      <input type="file" id="file-input" accept="image/*" hidden>
    </div>
    ${overlayHtml(s)}
    ${busy}
    ${resultHtml(s)}
    ${panelsHtml(s)}
    <div class="actions">
      <button id="predict-btn" ${s.imageUrl && !s.inFlight ? "" : "disabled"}>analyze</button>
      <button id="preprocess-btn" ${s.imageUrl && !s.inFlight ? "" : "disabled"}>preprocessing steps</button>
      <label class="base-url">service <input type="text" id="base-url"></label>
    </div>`;
}
