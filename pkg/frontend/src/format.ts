/** Presentation helpers. These only reformat values the service returned;
 * they never derive new quantities. */

/** 0.997 -> "99.7%" (always one decimal place). */
export function percent(confidence: number): string {
  return `${(confidence * 100).toFixed(1)}%`;
}

/** latency_ms straight from the payload, e.g. "12.4 ms". */
export function latency(ms: number): string {
  return `${ms} ms`;
}

export function pngDataUrl(base64: string): string {
  return `data:image/png;base64,${base64}`;
}
