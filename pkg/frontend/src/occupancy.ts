// Occupancy chart geometry. Pure functions compute the pixel paths so tests
// can assert the band really contains the line; drawing is a thin wrapper.

import type { OccupancyRecord } from "./types.js";

export interface ChartFrame {
  width: number;
  height: number;
  padLeft: number;
  padRight: number;
  padTop: number;
  padBottom: number;
}

export const DEFAULT_FRAME: ChartFrame = {
  width: 640,
  height: 240,
  padLeft: 42,
  padRight: 12,
  padTop: 10,
  padBottom: 24,
};

export interface Point {
  x: number;
  y: number;
}

export interface OccupancyGeometry {
  /** Estimate polyline, one point per bin, in bin order. */
  line: Point[];
  /** ci_high polyline forward then ci_low reversed; close to fill the band. */
  band: Point[];
  /** Upper/lower band points aligned with `line` by index. */
  high: Point[];
  low: Point[];
}

/** x position of bin i: bins spread evenly across the plot area. */
export function xOf(i: number, nBins: number, frame: ChartFrame): number {
  const inner = frame.width - frame.padLeft - frame.padRight;
  if (nBins === 1) return frame.padLeft + inner / 2;
  return frame.padLeft + (inner * i) / (nBins - 1);
}

/** y position of a value in [0, 1]; 1 at the top of the plot area. */
export function yOf(v: number, frame: ChartFrame): number {
  const inner = frame.height - frame.padTop - frame.padBottom;
  return frame.padTop + inner * (1 - v);
}

export function occupancyGeometry(
  curve: OccupancyRecord,
  frame: ChartFrame = DEFAULT_FRAME,
): OccupancyGeometry {
  const n = curve.bins.length;
  const line: Point[] = [];
  const high: Point[] = [];
  const low: Point[] = [];
  for (let i = 0; i < n; i++) {
    const b = curve.bins[i];
    const x = xOf(i, n, frame);
    line.push({ x, y: yOf(b.estimate, frame) });
    high.push({ x, y: yOf(b.ci_high, frame) });
    low.push({ x, y: yOf(b.ci_low, frame) });
  }
  return { line, high, low, band: [...high, ...[...low].reverse()] };
}

/**
 * True when the CI band contains the estimate at every bin, checked in
 * chart space: the line's y sits between the band edges (inclusive).
 */
export function bandContainsLine(geom: OccupancyGeometry): boolean {
  return geom.line.every((p, i) => geom.high[i].y <= p.y && p.y <= geom.low[i].y);
}

export function formatBinStart(start: number): string {
  const h = Math.floor(start / 3600);
  const m = Math.floor((start % 3600) / 60);
  return `${String(h).padStart(2, "0")}:${String(m).padStart(2, "0")}`;
}

export function drawOccupancy(
  canvas: HTMLCanvasElement,
  curve: OccupancyRecord,
  frame: ChartFrame = DEFAULT_FRAME,
): OccupancyGeometry {
  canvas.width = frame.width;
  canvas.height = frame.height;
  const geom = occupancyGeometry(curve, frame);
  const ctx = canvas.getContext("2d");
  if (!ctx) return geom; // headless DOM without canvas support
  ctx.clearRect(0, 0, frame.width, frame.height);

  // y gridlines at 0, 0.5, 1
  ctx.strokeStyle = "#d5d9e0";
  ctx.fillStyle = "#5a6472";
  ctx.font = "11px sans-serif";
  ctx.lineWidth = 1;
  for (const v of [0, 0.5, 1]) {
    const y = yOf(v, frame);
    ctx.beginPath();
    ctx.moveTo(frame.padLeft, y);
    ctx.lineTo(frame.width - frame.padRight, y);
    ctx.stroke();
    ctx.fillText(v.toFixed(1), 8, y + 4);
  }

  if (geom.band.length > 0) {
    ctx.beginPath();
    geom.band.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.closePath();
    ctx.fillStyle = "rgba(68, 119, 204, 0.25)";
    ctx.fill();

    ctx.beginPath();
    geom.line.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.strokeStyle = "#2a5db0";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }

  // sparse x labels
  ctx.fillStyle = "#5a6472";
  const n = curve.bins.length;
  const step = Math.max(1, Math.floor(n / 8));
  for (let i = 0; i < n; i += step) {
    ctx.fillText(formatBinStart(curve.bins[i].start), xOf(i, n, frame) - 13, frame.height - 8);
  }
  return geom;
}
