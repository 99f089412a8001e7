// Thin typed client over the gateway API. Every method maps to exactly one
// endpoint; failures carry the service's structured error body.

import type {
  IngestReport,
  Layer,
  OccupancyRecord,
  QueryRequestRec,
  QueryResult,
  ViewsResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly field: string | undefined;
  readonly status: number;

  constructor(status: number, code: string, message: string, field?: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.field = field;
  }
}

export interface OccupancyParams {
  bin?: number;
  confidence?: number;
  seed?: number;
  resamples?: number;
}

export interface ExportParams {
  radius?: number;
  population?: number;
  baseline?: string;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  const text = await resp.text();
  try {
    const body = JSON.parse(text) as { code?: string; message?: string; field?: string };
    if (typeof body.code === "string") {
      throw new ApiError(resp.status, body.code, body.message ?? "", body.field);
    }
  } catch (err) {
    if (err instanceof ApiError) throw err;
    // fall through: body was not the service's error envelope
  }
  throw new ApiError(resp.status, "http_error", `HTTP ${resp.status}: ${text.slice(0, 200)}`);
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  /**
   * @param baseUrl prefix for every request; "" targets the page's own origin
   *   (the gateway serves the console under /console).
   */
  constructor(baseUrl = "", fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    // bind so the default works when fetch is a global, not a method
    this.fetchFn = fetchFn ?? ((url, init) => globalThis.fetch(url, init));
  }

  async views(): Promise<ViewsResponse> {
    const resp = await this.fetchFn(`${this.base}/views`);
    await raiseForStatus(resp);
    return (await resp.json()) as ViewsResponse;
  }

  async query(req: QueryRequestRec): Promise<QueryResult> {
    const resp = await this.fetchFn(`${this.base}/query`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    await raiseForStatus(resp);
    return (await resp.json()) as QueryResult;
  }

  async occupancy(venue: string, params: OccupancyParams = {}): Promise<OccupancyRecord> {
    const qs = new URLSearchParams();
    if (params.bin !== undefined) qs.set("bin", String(params.bin));
    if (params.confidence !== undefined) qs.set("confidence", String(params.confidence));
    if (params.seed !== undefined) qs.set("seed", String(params.seed));
    if (params.resamples !== undefined) qs.set("resamples", String(params.resamples));
    const suffix = qs.size > 0 ? `?${qs.toString()}` : "";
    const resp = await this.fetchFn(`${this.base}/occupancy/${encodeURIComponent(venue)}${suffix}`);
    await raiseForStatus(resp);
    return (await resp.json()) as OccupancyRecord;
  }

  /** Fetch a raster layer as ESRI ASCII grid text. */
  async exportAsc(view: string, layer: Layer, params: ExportParams = {}): Promise<string> {
    const qs = new URLSearchParams({ format: "asc", layer });
    if (params.radius !== undefined) qs.set("radius", String(params.radius));
    if (params.population !== undefined) qs.set("population", String(params.population));
    if (params.baseline !== undefined) qs.set("baseline", params.baseline);
    const resp = await this.fetchFn(`${this.base}/export/${encodeURIComponent(view)}?${qs.toString()}`);
    await raiseForStatus(resp);
    return resp.text();
  }

  async postEvents(ndjson: string): Promise<IngestReport> {
    const resp = await this.fetchFn(`${this.base}/events`, {
      method: "POST",
      headers: { "Content-Type": "application/x-ndjson" },
      body: ndjson,
    });
    await raiseForStatus(resp);
    return (await resp.json()) as IngestReport;
  }
}
