// Query console controller: validates a request against the /views
// metadata, submits it, and shapes the response for display. Displayed
// numbers are String(value) conversions of the API's own JSON numbers,
// never reformatted or recomputed, so Number(text) round-trips exactly.

import { ApiClient, ApiError } from "./api.js";
import type { ConsoleState } from "./state.js";
import { validBbox } from "./state.js";
import type {
  Aggregate,
  QueryRequestRec,
  QueryResult,
  TotalResult,
  ViewStatus,
} from "./types.js";

export const AGGREGATES: readonly Aggregate[] = ["total", "grid", "top_k_cells", "per_venue"];

export interface DisplayScalar {
  kind: "scalar";
  text: string;
  raw: TotalResult;
}

export interface DisplayTable {
  kind: "table";
  columns: string[];
  rows: string[][];
  raw: QueryResult;
}

export interface DisplayGrid {
  kind: "grid";
  text: string;
  raw: QueryResult;
}

export interface DisplayError {
  kind: "error";
  code: string;
  message: string;
  field?: string;
}

export type DisplayResult = DisplayScalar | DisplayTable | DisplayGrid | DisplayError;

/** Client-side form validation; out-of-bounds boxes are left to the API. */
export function validateRequest(req: QueryRequestRec, views: ViewStatus[]): string[] {
  const problems: string[] = [];
  if (!views.some((v) => v.name === req.view)) {
    problems.push(`unknown view ${JSON.stringify(req.view)}`);
  }
  if (!AGGREGATES.includes(req.aggregate)) {
    problems.push(`aggregate must be one of ${AGGREGATES.join(", ")}`);
  }
  if (req.k !== undefined) {
    if (req.aggregate !== "top_k_cells") problems.push("k only applies to top_k_cells");
    if (!Number.isInteger(req.k) || req.k < 1) problems.push("k must be a positive integer");
  }
  if (req.sub_bbox !== undefined && !validBbox(req.sub_bbox)) {
    problems.push("sub_bbox is not a valid bounding box");
  }
  if (req.sub_window !== undefined) {
    const w = req.sub_window;
    if (!Number.isInteger(w.start) || !Number.isInteger(w.end) || w.start >= w.end) {
      problems.push("sub_window must be integer seconds with start < end");
    }
  }
  return problems;
}

export function formatResult(result: QueryResult): DisplayResult {
  switch (result.aggregate) {
    case "total":
      return { kind: "scalar", text: String(result.value), raw: result };
    case "top_k_cells":
      return {
        kind: "table",
        columns: ["row", "col", "count"],
        rows: result.cells.map((c) => [String(c.row), String(c.col), String(c.count)]),
        raw: result,
      };
    case "per_venue":
      return {
        kind: "table",
        columns: ["venue", ...result.bin_starts.map(String)],
        rows: Object.entries(result.venues).map(([venue, counts]) => [
          venue,
          ...counts.map(String),
        ]),
        raw: result,
      };
    case "grid":
      return {
        kind: "grid",
        text: `${result.grid_spec.nrows} x ${result.grid_spec.ncols} grid`,
        raw: result,
      };
  }
}

function summarize(display: DisplayResult): string {
  switch (display.kind) {
    case "scalar":
      return `value ${display.text}`;
    case "table":
      return `${display.rows.length} rows`;
    case "grid":
      return display.text;
    case "error":
      return `error ${display.code}`;
  }
}

/** Submit a query, record it in history, and shape the outcome. */
export async function submitQuery(
  api: ApiClient,
  state: ConsoleState,
  req: QueryRequestRec,
): Promise<DisplayResult> {
  let display: DisplayResult;
  try {
    display = formatResult(await api.query(req));
  } catch (err) {
    if (err instanceof ApiError) {
      display = { kind: "error", code: err.code, message: err.message, field: err.field };
    } else {
      const message = err instanceof Error ? err.message : String(err);
      display = { kind: "error", code: "network_error", message };
    }
  }
  state.pushHistory(req, summarize(display), display.kind !== "error");
  return display;
}

export interface ComparedTotals {
  a: TotalResult;
  b: TotalResult;
}

/** Side-by-side totals are literally two API calls, nothing merged. */
export async function compareTotals(
  api: ApiClient,
  viewA: string,
  viewB: string,
): Promise<ComparedTotals> {
  const [a, b] = await Promise.all([
    api.query({ view: viewA, aggregate: "total" }),
    api.query({ view: viewB, aggregate: "total" }),
  ]);
  return { a: a as TotalResult, b: b as TotalResult };
}
