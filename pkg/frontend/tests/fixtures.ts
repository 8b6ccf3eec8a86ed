/** Canned responses mirroring the inference service's JSON schema. */

import type { Prediction, PreprocessPanels } from "../src/api.js";

// 1x1 red PNG, enough to stand in for any returned image.
export const TINY_PNG =
  "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR4nGP4z8DwHwAFAAH/q842iQAAAABJRU5ErkJggg==";

export const PREDICT_FRACTURED: Prediction = {
  label: "fractured",
  confidence: 0.997,
  probabilities: { fractured: 0.997, not_fractured: 0.003 },
  latency_ms: 12.4,
  heatmap: TINY_PNG,
};

export const PREDICT_INTACT: Prediction = {
  label: "not fractured",
  confidence: 0.812,
  probabilities: { fractured: 0.188, not_fractured: 0.812 },
  latency_ms: 9.1,
};

export const PANELS: PreprocessPanels = {
  original: TINY_PNG,
  enhanced: TINY_PNG,
  mask: TINY_PNG,
  edges: TINY_PNG,
  degenerate_mask: false,
};

export const PANELS_DEGENERATE: PreprocessPanels = {
  ...PANELS,
  degenerate_mask: true,
};

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function errorResponse(status: number, detail?: string): Response {
  return jsonResponse(detail === undefined ? {} : { detail }, status);
}

/** fetch stand-in that replays queued responses and records requests. */
export function mockFetch(...responses: Array<Response | Error>) {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const fn = async (input: RequestInfo | URL, init?: RequestInit) => {
    calls.push({ url: String(input), init });
    const next = responses.shift();
    if (next === undefined) throw new Error("mockFetch: no response queued");
    if (next instanceof Error) throw next;
    return next;
  };
  return { fn: fn as typeof fetch, calls };
}
