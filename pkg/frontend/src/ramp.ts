// Heat color ramp. Documented contract (see README "Color ramp"):
//
//   t = 0                -> RAMP_STOPS[0]  (near-black purple)
//   t = 1                -> RAMP_STOPS[5]  (bright yellow)
//   between stops        -> linear sRGB interpolation
//
// The ramp is monotone: relative luminance strictly increases with t, so a
// brighter pixel always means a larger value. The stops follow the familiar
// plasma progression.

export const RAMP_STOPS: readonly string[] = [
  "#0d0887",
  "#6a00a8",
  "#b12a90",
  "#e16462",
  "#fca636",
  "#f0f921",
];

export type Rgb = readonly [number, number, number];

export function hexToRgb(hex: string): Rgb {
  const m = /^#([0-9a-f]{6})$/i.exec(hex);
  if (!m) throw new Error(`bad hex color ${hex}`);
  const n = parseInt(m[1], 16);
  return [(n >> 16) & 0xff, (n >> 8) & 0xff, n & 0xff];
}

const STOP_RGB: readonly Rgb[] = RAMP_STOPS.map(hexToRgb);

/** Color for a normalized value t in [0, 1]; out-of-range t is clamped. */
export function rampColor(t: number): Rgb {
  if (!Number.isFinite(t)) throw new Error(`ramp t must be finite, got ${t}`);
  const clamped = Math.min(1, Math.max(0, t));
  const scaled = clamped * (STOP_RGB.length - 1);
  const i = Math.min(STOP_RGB.length - 2, Math.floor(scaled));
  const frac = scaled - i;
  const a = STOP_RGB[i];
  const b = STOP_RGB[i + 1];
  return [
    Math.round(a[0] + (b[0] - a[0]) * frac),
    Math.round(a[1] + (b[1] - a[1]) * frac),
    Math.round(a[2] + (b[2] - a[2]) * frac),
  ];
}

/** WCAG relative luminance; used by tests to prove the ramp is monotone. */
export function relativeLuminance([r, g, b]: Rgb): number {
  const lin = (c: number) => {
    const s = c / 255;
    return s <= 0.04045 ? s / 12.92 : ((s + 0.055) / 1.055) ** 2.4;
  };
  return 0.2126 * lin(r) + 0.7152 * lin(g) + 0.0722 * lin(b);
}

export function cssColor([r, g, b]: Rgb): string {
  return `rgb(${r}, ${g}, ${b})`;
}

/** CSS linear-gradient covering the full ramp, for the legend bar. */
export function rampGradient(): string {
  return `linear-gradient(to right, ${RAMP_STOPS.join(", ")})`;
}
