/** Typed client for the fracturekit inference service. All numbers displayed
 * by the UI come verbatim from these response payloads; no math happens in
 * the browser. */

export interface Prediction {
  label: string;
  confidence: number;
  probabilities: Record<string, number>;
  latency_ms: number;
  heatmap?: string; // base64 PNG overlay, present when requested
}

export interface PreprocessPanels {
  original: string;
  enhanced: string;
  mask: string;
  edges: string;
  degenerate_mask: boolean;
}

export interface HealthStatus {
  loaded: boolean;
  digest: string | null;
  version: string;
}

/** Thrown for any non-2xx response; `message` is already human-readable. */
export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ServiceError";
  }
}

function messageFor(status: number, detail: string | undefined): string {
  switch (status) {
    case 400:
      return detail ?? "the server could not decode that image";
    case 413:
      return "the image is too large for the server to accept";
    case 503:
      return "model not loaded";
    default:
      return detail ?? `service error (HTTP ${status})`;
  }
}

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let detail: string | undefined;
  try {
    const body = (await res.json()) as { detail?: string };
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; fall back to the status-based message
  }
  throw new ServiceError(res.status, messageFor(res.status, detail));
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  setBaseUrl(url: string): void {
    this.baseUrl = url.replace(/\/+$/, "");
  }

  getBaseUrl(): string {
    return this.baseUrl;
  }

  async health(): Promise<HealthStatus> {
    const res = await this.fetchFn(`${this.baseUrl}/health`);
    await raiseForStatus(res);
    return (await res.json()) as HealthStatus;
  }

  async predict(image: Blob, withHeatmap: boolean): Promise<Prediction> {
    const res = await this.fetchFn(
      `${this.baseUrl}/api/predict?heatmap=${withHeatmap}`,
      { method: "POST", body: image },
    );
    await raiseForStatus(res);
    return (await res.json()) as Prediction;
  }

  async preprocess(image: Blob): Promise<PreprocessPanels> {
    const res = await this.fetchFn(`${this.baseUrl}/api/preprocess`, {
      method: "POST",
      body: image,
    });
    await raiseForStatus(res);
    return (await res.json()) as PreprocessPanels;
  }
}

/** Turn a predict/preprocess failure into banner text. */
export function bannerText(err: unknown): string {
  if (err instanceof ServiceError) return err.message;
  if (err instanceof Error) return `could not reach the service: ${err.message}`;
  return "could not reach the service";
}
