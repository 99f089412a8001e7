// Record shapes of the gateway HTTP API. These mirror the service's JSON
// bodies verbatim; the console never derives analytics of its own.

export interface BboxRec {
  min_lat: number;
  min_lon: number;
  max_lat: number;
  max_lon: number;
}

export interface GridSpecRec {
  bbox: BboxRec;
  cellsize: number;
  ncols: number;
  nrows: number;
}

export interface WindowRec {
  start: number;
  end: number;
}

export interface ViewStatus {
  name: string;
  spec: GridSpecRec;
  window: WindowRec;
  bin_width: number;
  venues: string[];
  watermark: number;
  realtime_ceiling: number;
}

export interface ViewsResponse {
  views: ViewStatus[];
}

export type Aggregate = "total" | "grid" | "top_k_cells" | "per_venue";

export interface QueryRequestRec {
  view: string;
  aggregate: Aggregate;
  sub_bbox?: BboxRec;
  sub_window?: WindowRec;
  k?: number;
}

interface QueryResultBase {
  view: string;
  aggregate: Aggregate;
  watermark: number;
  as_of_seq: number;
  freshness: number;
}

export interface TotalResult extends QueryResultBase {
  aggregate: "total";
  value: number;
}

export interface GridResult extends QueryResultBase {
  aggregate: "grid";
  grid: number[][];
  grid_spec: GridSpecRec;
}

export interface CellCount {
  row: number;
  col: number;
  count: number;
}

export interface TopKResult extends QueryResultBase {
  aggregate: "top_k_cells";
  cells: CellCount[];
}

export interface PerVenueResult extends QueryResultBase {
  aggregate: "per_venue";
  venues: Record<string, number[]>;
  bin_starts: number[];
  bin_width: number;
}

export type QueryResult = TotalResult | GridResult | TopKResult | PerVenueResult;

export interface OccupancyBin {
  start: number;
  estimate: number;
  ci_low: number;
  ci_high: number;
}

export interface OccupancyRecord {
  venue_id: string;
  bin_width: number;
  bins: OccupancyBin[];
  confidence: number;
  n_days: number;
  seed: number;
  resamples: number;
}

export interface IngestReport {
  accepted: number;
  rejected: number;
  last_seq: number;
}

export interface ErrorBody {
  code: string;
  message: string;
  field?: string;
}

export type Layer = "raw" | "kde" | "final";
