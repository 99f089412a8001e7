"""Text codecs for rasters, tables, and event files.

Three wire formats, all line-oriented so exports can stream:

* ESRI ASCII grid (.asc) for rasters — six header lines then rows of cell
  values, northernmost row first, 10 significant digits.
* CSV with a header row for tabular products (venue bins, occupancy curves).
* NDJSON for event dumps, one object per line.

Writers emit deterministic bytes for identical inputs; every reader inverts
its writer losslessly at the printed precision.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import IO, Iterable, Iterator, Mapping

import numpy as np

from .analytics import OccupancyCurve
from .core import BoundingBox, GeoEvent, GridSpec, RasterGrid
from .errors import InvalidArgument, SpecMismatch, ValidationError

_ASC_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def _fmt_value(v: float) -> str:
    return "%.10g" % v


def iter_asc_lines(raster: RasterGrid) -> Iterator[str]:
    """Lines of the ASCII grid encoding, newline included."""
    spec = raster.spec
    yield f"NCOLS {spec.ncols}\n"
    yield f"NROWS {spec.nrows}\n"
    yield f"XLLCORNER {spec.bbox.min_lon!r}\n"
    yield f"YLLCORNER {spec.bbox.min_lat!r}\n"
    yield f"CELLSIZE {spec.cellsize!r}\n"
    yield f"NODATA_VALUE {_fmt_value(raster.nodata)}\n"
    for row in raster.values:
        yield " ".join(_fmt_value(v) for v in row) + "\n"


def write_asc(raster: RasterGrid, fp: IO[str]) -> None:
    for line in iter_asc_lines(raster):
        fp.write(line)


def asc_dumps(raster: RasterGrid) -> str:
    return "".join(iter_asc_lines(raster))


def read_asc(fp: IO[str]) -> RasterGrid:
    """Parse an ASCII grid back into a RasterGrid.

    The grid spec is reconstructed from the header corner and cell size; the
    declared NCOLS/NROWS must agree with the reconstructed dimensions.
    """
    header: dict[str, float] = {}
    rows: list[list[float]] = []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0].lower()
        if len(parts) == 2 and key in _ASC_HEADER_KEYS and key not in header:
            try:
                header[key] = float(parts[1])
            except ValueError:
                raise InvalidArgument(f"bad header value in line {line!r}", field=key) from None
            continue
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise InvalidArgument(f"bad cell value in line {line!r}", field="values") from None
    missing = [k for k in _ASC_HEADER_KEYS if k not in header]
    if missing:
        raise InvalidArgument(f"asc header missing {', '.join(missing)}", field="header")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    cellsize = header["cellsize"]
    min_lon, min_lat = header["xllcorner"], header["yllcorner"]
    bbox = BoundingBox(
        min_lat=min_lat,
        min_lon=min_lon,
        max_lat=min_lat + nrows * cellsize,
        max_lon=min_lon + ncols * cellsize,
    )
    spec = GridSpec(bbox=bbox, cellsize=cellsize)
    if (spec.ncols, spec.nrows) != (ncols, nrows):
        raise SpecMismatch(
            f"declared {ncols}x{nrows} but corner/cellsize imply {spec.ncols}x{spec.nrows}"
        )
    values = np.array(rows, dtype=np.float64)
    if values.shape != (nrows, ncols):
        raise InvalidArgument(
            f"expected {nrows} rows of {ncols} values, got shape {values.shape}", field="values"
        )
    return RasterGrid(spec=spec, values=values, nodata=header["nodata_value"])


def read_asc_path(path) -> RasterGrid:
    with open(path, "r", encoding="utf-8") as fp:
        return read_asc(fp)


def write_asc_path(raster: RasterGrid, path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        write_asc(raster, fp)


def event_to_json_line(event: GeoEvent) -> str:
    return json.dumps(event.to_record(), ensure_ascii=False, separators=(",", ":")) + "\n"


def iter_ndjson_lines(events: Iterable[GeoEvent]) -> Iterator[str]:
    for ev in events:
        yield event_to_json_line(ev)


def write_events_ndjson(events: Iterable[GeoEvent], fp: IO[str]) -> int:
    """Dump events one per line; returns the number written."""
    n = 0
    for line in iter_ndjson_lines(events):
        fp.write(line)
        n += 1
    return n


def parse_event_line(line: str) -> GeoEvent:
    """One NDJSON line to a validated event; ValidationError on any defect."""
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"line is not valid JSON: {exc.msg}", field=None) from None
    return GeoEvent.from_record(raw)


def read_events_ndjson(fp: IO[str]) -> Iterator[GeoEvent]:
    """Parse an NDJSON event file strictly; blank lines are skipped."""
    for line in fp:
        if line.strip():
            yield parse_event_line(line)


# Venue tables are written long-form: one row per (venue, bin), so the file
# needs no column metadata beyond the header.
VENUE_CSV_FIELDS = ("venue_id", "bin_index", "bin_start", "count")


def iter_venue_csv_lines(
    venue_bins: Mapping[str, Iterable[int]], window_start: int, bin_width: int
) -> Iterator[str]:
    def one_line(fields) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(fields)
        return buf.getvalue()

    yield one_line(VENUE_CSV_FIELDS)
    for venue_id in sorted(venue_bins):
        for i, count in enumerate(venue_bins[venue_id]):
            yield one_line([venue_id, i, window_start + i * bin_width, int(count)])


def venue_csv_dumps(
    venue_bins: Mapping[str, Iterable[int]], window_start: int, bin_width: int
) -> str:
    return "".join(iter_venue_csv_lines(venue_bins, window_start, bin_width))


def read_venue_csv(fp: IO[str]) -> tuple[dict[str, list[int]], int | None, int | None]:
    """Invert venue_csv_dumps: (venue -> bins, window_start, bin_width).

    Start and width are recovered from the bin_start column; both are None
    when the table has no venue with at least one bin (width also needs two).
    """
    reader = csv.DictReader(fp)
    if reader.fieldnames is None or tuple(reader.fieldnames) != VENUE_CSV_FIELDS:
        raise InvalidArgument(f"expected header {','.join(VENUE_CSV_FIELDS)}", field="header")
    bins: dict[str, list[int]] = {}
    start: int | None = None
    width: int | None = None
    for row in reader:
        venue = row["venue_id"]
        idx, bin_start, count = int(row["bin_index"]), int(row["bin_start"]), int(row["count"])
        per = bins.setdefault(venue, [])
        if idx != len(per):
            raise InvalidArgument(f"bin_index gap for venue {venue!r} at {idx}", field="bin_index")
        per.append(count)
        if idx == 0:
            start = bin_start
        elif idx == 1:
            width = bin_start - start if start is not None else None
    return bins, start, width


OCCUPANCY_CSV_FIELDS = (
    "venue_id",
    "bin_start",
    "bin_width",
    "estimate",
    "ci_low",
    "ci_high",
    "n_days",
    "confidence",
    "seed",
    "resamples",
)


def occupancy_csv_dumps(curve: OccupancyCurve) -> str:
    """Occupancy curve as a flat CSV table, one row per bin.

    Floats are printed with shortest round-trip precision, so parsing the
    file recovers the exact values.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(OCCUPANCY_CSV_FIELDS)
    for start, est, lo, hi in zip(
        curve.bin_start_offsets, curve.estimate, curve.ci_low, curve.ci_high
    ):
        writer.writerow(
            [
                curve.venue_id,
                start,
                curve.bin_width,
                repr(est),
                repr(lo),
                repr(hi),
                curve.n_days,
                repr(curve.confidence),
                curve.seed,
                curve.resamples,
            ]
        )
    return buf.getvalue()


def read_occupancy_csv(fp: IO[str]) -> OccupancyCurve:
    reader = csv.DictReader(fp)
    if reader.fieldnames is None or tuple(reader.fieldnames) != OCCUPANCY_CSV_FIELDS:
        raise InvalidArgument(f"expected header {','.join(OCCUPANCY_CSV_FIELDS)}", field="header")
    rows = list(reader)
    if not rows:
        raise InvalidArgument("occupancy table has no rows", field="rows")
    first = rows[0]
    starts = [int(r["bin_start"]) for r in rows]
    step = int(first["bin_width"])
    return OccupancyCurve(
        venue_id=first["venue_id"],
        bin_width=step,
        bin_start_offsets=tuple(starts),
        estimate=tuple(float(r["estimate"]) for r in rows),
        ci_low=tuple(float(r["ci_low"]) for r in rows),
        ci_high=tuple(float(r["ci_high"]) for r in rows),
        n_days=int(first["n_days"]),
        confidence=float(first["confidence"]),
        seed=int(first["seed"]),
        resamples=int(first["resamples"]),
    )


def raster_close(a: RasterGrid, b: RasterGrid, rel: float = 1e-9) -> bool:
    """True when two rasters agree within a relative tolerance (nodata exact)."""
    if a.spec != b.spec or a.nodata != b.nodata:
        return False
    am, bm = a.data_mask, b.data_mask
    if not np.array_equal(am, bm):
        return False
    scale = max(1.0, float(np.abs(a.values[am]).max()) if am.any() else 1.0)
    return bool(np.allclose(a.values[am], b.values[bm], rtol=0.0, atol=rel * scale)) and math.isclose(
        a.data_total(), b.data_total(), rel_tol=rel, abs_tol=rel
    )
