// Console state. Everything here is plain data plus invariant enforcement;
// the DOM layer reads it, never the other way around.

import { MIN_POLL_MS, DEFAULT_POLL_MS } from "./poller.js";
import type { BboxRec, Layer, QueryRequestRec } from "./types.js";

export const HISTORY_LIMIT = 50;

export interface HistoryEntry {
  id: number;
  at: number; // epoch ms when issued
  request: QueryRequestRec;
  /** One-line outcome, e.g. "value 10601" or "error out_of_bounds". */
  summary: string;
  ok: boolean;
}

export function validBbox(b: BboxRec): boolean {
  return (
    Number.isFinite(b.min_lat) &&
    Number.isFinite(b.min_lon) &&
    Number.isFinite(b.max_lat) &&
    Number.isFinite(b.max_lon) &&
    b.min_lat >= -90 &&
    b.max_lat <= 90 &&
    b.min_lon >= -180 &&
    b.max_lon <= 180 &&
    b.min_lat < b.max_lat &&
    b.min_lon < b.max_lon
  );
}

export class ConsoleState {
  selectedView: string | null = null;
  layer: Layer = "raw";
  compareScenarios = false;
  private viewportBox: BboxRec | null = null;
  private pollMs: number = DEFAULT_POLL_MS;
  private historyEntries: HistoryEntry[] = [];
  private nextId = 1;

  get viewport(): BboxRec | null {
    return this.viewportBox;
  }

  /** Rejects invalid boxes so the map never gets a degenerate viewport. */
  setViewport(b: BboxRec): void {
    if (!validBbox(b)) {
      throw new Error(
        `invalid viewport [${b.min_lat}, ${b.min_lon}] .. [${b.max_lat}, ${b.max_lon}]`,
      );
    }
    this.viewportBox = { ...b };
  }

  get pollIntervalMs(): number {
    return this.pollMs;
  }

  set pollIntervalMs(ms: number) {
    // invariant: never below one second
    this.pollMs = Number.isFinite(ms) ? Math.max(MIN_POLL_MS, ms) : DEFAULT_POLL_MS;
  }

  get history(): readonly HistoryEntry[] {
    return this.historyEntries;
  }

  pushHistory(request: QueryRequestRec, summary: string, ok: boolean): HistoryEntry {
    const entry: HistoryEntry = {
      id: this.nextId++,
      at: Date.now(),
      request: structuredClone(request),
      summary,
      ok,
    };
    this.historyEntries.push(entry);
    if (this.historyEntries.length > HISTORY_LIMIT) {
      this.historyEntries.splice(0, this.historyEntries.length - HISTORY_LIMIT);
    }
    return entry;
  }

  /** A fresh copy of a past request, ready to submit again. */
  replay(id: number): QueryRequestRec | null {
    const entry = this.historyEntries.find((e) => e.id === id);
    return entry ? structuredClone(entry.request) : null;
  }

  clearHistory(): void {
    this.historyEntries = [];
  }
}
