// Parser for the ESRI ASCII grid text served by /export?format=asc.
// Presentation-side parsing only; the numbers are displayed as received.

export interface AscGrid {
  ncols: number;
  nrows: number;
  xllcorner: number;
  yllcorner: number;
  cellsize: number;
  nodata: number;
  /** Row-major, row 0 northernmost, exactly as the rows appear in the file. */
  values: number[][];
}

const HEADER_KEYS = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

export function parseAsc(text: string): AscGrid {
  const header = new Map<string, number>();
  const rows: number[][] = [];
  for (const rawLine of text.split("\n")) {
    const line = rawLine.trim();
    if (line === "") continue;
    const parts = line.split(/\s+/);
    const key = parts[0].toLowerCase();
    if (rows.length === 0 && parts.length === 2 && HEADER_KEYS.includes(key)) {
      const value = Number(parts[1]);
      if (!Number.isFinite(value)) throw new Error(`bad header value in ${JSON.stringify(line)}`);
      header.set(key, value);
      continue;
    }
    const row = parts.map(Number);
    if (row.some((v) => Number.isNaN(v))) {
      throw new Error(`bad cell value in ${JSON.stringify(line)}`);
    }
    rows.push(row);
  }
  const missing = HEADER_KEYS.filter((k) => !header.has(k));
  if (missing.length > 0) throw new Error(`asc header missing ${missing.join(", ")}`);
  const ncols = header.get("ncols")!;
  const nrows = header.get("nrows")!;
  if (rows.length !== nrows || rows.some((r) => r.length !== ncols)) {
    throw new Error(`expected ${nrows} rows of ${ncols} values`);
  }
  return {
    ncols,
    nrows,
    xllcorner: header.get("xllcorner")!,
    yllcorner: header.get("yllcorner")!,
    cellsize: header.get("cellsize")!,
    nodata: header.get("nodata_value")!,
    values: rows,
  };
}
