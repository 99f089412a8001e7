// Grid responses become RGBA pixel buffers here, one pixel per cell. The
// screen mapping (README "Grid to screen") is nearest-neighbor scaling of
// that buffer, so cell (row, col) covers the rectangle
// [col*W/ncols, (col+1)*W/ncols) x [row*H/nrows, (row+1)*H/nrows) with
// row 0 (the northernmost row) at the top.

import type { AscGrid } from "./asc.js";
import type { GridResult } from "./types.js";
import { rampColor } from "./ramp.js";

export class MalformedGrid extends Error {
  constructor(message: string) {
    super(message);
    this.name = "MalformedGrid";
  }
}

export interface HeatSource {
  nrows: number;
  ncols: number;
  /** Row-major cell values, row 0 northernmost. */
  values: number[][];
  /** Cells equal to this value render fully transparent. */
  nodata?: number;
}

export interface Hottest {
  row: number;
  col: number;
  value: number;
}

export interface HeatRender {
  width: number;
  height: number;
  /** nrows*ncols RGBA pixels, row-major to match the grid. */
  rgba: Uint8ClampedArray;
  vmin: number;
  vmax: number;
  /** First maximal data cell in row-major order; null when all-nodata. */
  hottest: Hottest | null;
  legend: { min: string; max: string };
}

export function gridSource(result: GridResult): HeatSource {
  return { nrows: result.grid_spec.nrows, ncols: result.grid_spec.ncols, values: result.grid };
}

export function ascSource(grid: AscGrid): HeatSource {
  return { nrows: grid.nrows, ncols: grid.ncols, values: grid.values, nodata: grid.nodata };
}

/** Exact value text so legend numbers round-trip to the API response. */
export function formatLegend(v: number): string {
  return String(v);
}

export function renderHeatmap(src: HeatSource): HeatRender {
  const { nrows, ncols, values, nodata } = src;
  if (!Number.isInteger(nrows) || !Number.isInteger(ncols) || nrows < 1 || ncols < 1) {
    throw new MalformedGrid(`bad dimensions ${nrows}x${ncols}`);
  }
  if (!Array.isArray(values) || values.length !== nrows) {
    throw new MalformedGrid(`expected ${nrows} rows, got ${values?.length}`);
  }

  // first pass: validate and find the data range
  let vmin = Infinity;
  let vmax = -Infinity;
  let hottest: Hottest | null = null;
  for (let r = 0; r < nrows; r++) {
    const row = values[r];
    if (!Array.isArray(row) || row.length !== ncols) {
      throw new MalformedGrid(`row ${r} has ${row?.length} cells, expected ${ncols}`);
    }
    for (let c = 0; c < ncols; c++) {
      const v = row[c];
      if (nodata !== undefined && v === nodata) continue;
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new MalformedGrid(`cell (${r}, ${c}) is not a finite number: ${v}`);
      }
      if (v < vmin) vmin = v;
      if (v > vmax) {
        vmax = v;
        hottest = { row: r, col: c, value: v };
      }
    }
  }
  const empty = hottest === null; // every cell was nodata
  if (empty) {
    vmin = 0;
    vmax = 0;
  }

  const rgba = new Uint8ClampedArray(nrows * ncols * 4);
  const span = vmax - vmin;
  for (let r = 0; r < nrows; r++) {
    const row = values[r];
    for (let c = 0; c < ncols; c++) {
      const v = row[c];
      const o = (r * ncols + c) * 4;
      if (nodata !== undefined && v === nodata) {
        rgba[o + 3] = 0; // transparent, rgb left at 0
        continue;
      }
      // flat grids (span 0) sit at the bottom of the ramp
      const t = span > 0 ? (v - vmin) / span : 0;
      const [red, green, blue] = rampColor(t);
      rgba[o] = red;
      rgba[o + 1] = green;
      rgba[o + 2] = blue;
      rgba[o + 3] = 255;
    }
  }
  return {
    width: ncols,
    height: nrows,
    rgba,
    vmin,
    vmax,
    hottest,
    legend: { min: formatLegend(vmin), max: formatLegend(vmax) },
  };
}

/** Blit a render onto a canvas, one cell per pixel block, no smoothing. */
export function paintHeatmap(canvas: HTMLCanvasElement, render: HeatRender): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return; // headless DOM without canvas support; render math already done
  const cell = document.createElement("canvas");
  cell.width = render.width;
  cell.height = render.height;
  const cellCtx = cell.getContext("2d");
  if (!cellCtx) return;
  cellCtx.putImageData(new ImageData(render.rgba.slice(), render.width, render.height), 0, 0);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(cell, 0, 0, canvas.width, canvas.height);
}
