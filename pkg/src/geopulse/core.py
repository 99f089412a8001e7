"""Shared domain types and pure grid arithmetic.

Coordinates are geodetic WGS84 degrees throughout; grids are rectangular in
degrees (arc-second cells are "square" in degrees, not meters). Rasters are
row-major with row 0 the northernmost row, the same layout the ASCII grid
export uses. All types are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Mapping

import numpy as np

from .errors import InvalidArgument, ValidationError

#: 3 arc-seconds, the default cell size (~90 m of latitude per cell).
DEFAULT_CELLSIZE = 1.0 / 1200.0

#: Sentinel for cells carrying no data.
DEFAULT_NODATA = -9999.0

# Tolerance used when deciding whether a span is an exact multiple of the
# cell size; guards ceil() against float noise on exact grids.
_RATIO_EPS = 1e-9


class Source(str, Enum):
    """Closed set of event origins."""

    CHECKIN = "checkin"
    TWEET = "tweet"
    SENSOR = "sensor"
    OPEN_DATA = "open_data"


@dataclass(frozen=True)
class GeoEvent:
    """One geo-tagged, timestamped observation.

    ``ts`` is UTC epoch seconds. ``event_id`` must be unique within an
    archive; uniqueness is enforced at append time, not here.
    """

    event_id: str
    source: Source
    ts: int
    lat: float
    lon: float
    venue_id: str | None = None
    attributes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.event_id or not isinstance(self.event_id, str):
            raise ValidationError("event_id must be a non-empty string", field="event_id")
        if not isinstance(self.source, Source):
            raise ValidationError(f"unknown source {self.source!r}", field="source")
        if not isinstance(self.ts, int) or isinstance(self.ts, bool) or self.ts <= 0:
            raise ValidationError("ts must be a positive integer epoch", field="ts")
        if not (isinstance(self.lat, (int, float)) and -90.0 <= self.lat <= 90.0):
            raise ValidationError(f"lat {self.lat!r} out of range [-90, 90]", field="lat")
        if not (isinstance(self.lon, (int, float)) and -180.0 <= self.lon <= 180.0):
            raise ValidationError(f"lon {self.lon!r} out of range [-180, 180]", field="lon")
        if self.venue_id is not None and (not self.venue_id or not isinstance(self.venue_id, str)):
            raise ValidationError("venue_id must be a non-empty string when present", field="venue_id")

    def to_record(self) -> dict[str, Any]:
        """Serialize to the NDJSON wire shape; optional fields omitted when empty."""
        rec: dict[str, Any] = {
            "event_id": self.event_id,
            "source": self.source.value,
            "ts": self.ts,
            "lat": self.lat,
            "lon": self.lon,
        }
        if self.venue_id is not None:
            rec["venue_id"] = self.venue_id
        if self.attributes:
            rec["attributes"] = dict(self.attributes)
        return rec

    @classmethod
    def from_record(cls, raw: Mapping[str, Any]) -> "GeoEvent":
        """Build a validated event from a parsed NDJSON object.

        Unknown keys are ignored. Raises ValidationError naming the first
        offending field.
        """
        if not isinstance(raw, Mapping):
            raise ValidationError("record must be a JSON object", field=None)
        for name in ("event_id", "source", "ts", "lat", "lon"):
            if name not in raw:
                raise ValidationError(f"missing field {name}", field=name)
        try:
            source = Source(raw["source"])
        except ValueError:
            raise ValidationError(f"unknown source {raw['source']!r}", field="source") from None
        ts = raw["ts"]
        if isinstance(ts, float):
            if not ts.is_integer():
                raise ValidationError("ts must be integer epoch seconds", field="ts")
            ts = int(ts)
        lat, lon = raw["lat"], raw["lon"]
        for name, value in (("lat", lat), ("lon", lon)):
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
                raise ValidationError(f"{name} must be a finite number", field=name)
        attributes = raw.get("attributes") or {}
        if not isinstance(attributes, Mapping) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in attributes.items()
        ):
            raise ValidationError("attributes must map strings to strings", field="attributes")
        return cls(
            event_id=raw["event_id"],
            source=source,
            ts=ts,
            lat=float(lat),
            lon=float(lon),
            venue_id=raw.get("venue_id"),
            attributes=dict(attributes),
        )


@dataclass(frozen=True)
class BoundingBox:
    """Geographic extent in degrees. Antimeridian-crossing boxes are rejected."""

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def __post_init__(self):
        if not (-90.0 <= self.min_lat < self.max_lat <= 90.0):
            raise InvalidArgument(
                f"latitude bounds invalid: [{self.min_lat}, {self.max_lat}]", field="bbox"
            )
        if not (-180.0 <= self.min_lon < self.max_lon <= 180.0):
            raise InvalidArgument(
                f"longitude bounds invalid: [{self.min_lon}, {self.max_lon}]", field="bbox"
            )

    def contains(self, lat: float, lon: float) -> bool:
        """Closed containment test (boundary points count as inside)."""
        return self.min_lat <= lat <= self.max_lat and self.min_lon <= lon <= self.max_lon

    def within(self, outer: "BoundingBox") -> bool:
        return (
            outer.min_lat <= self.min_lat
            and outer.min_lon <= self.min_lon
            and self.max_lat <= outer.max_lat
            and self.max_lon <= outer.max_lon
        )

    def to_record(self) -> dict[str, float]:
        return {
            "min_lat": self.min_lat,
            "min_lon": self.min_lon,
            "max_lat": self.max_lat,
            "max_lon": self.max_lon,
        }

    @classmethod
    def from_record(cls, raw: Mapping[str, Any]) -> "BoundingBox":
        try:
            return cls(
                min_lat=float(raw["min_lat"]),
                min_lon=float(raw["min_lon"]),
                max_lat=float(raw["max_lat"]),
                max_lon=float(raw["max_lon"]),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidArgument(f"malformed bounding box: {exc}", field="bbox") from None


def _cell_count(span: float, cellsize: float) -> int:
    # ceil with a tolerance so exact multiples do not gain a phantom cell
    return max(1, math.ceil(span / cellsize - _RATIO_EPS))


def grid_dims(bbox: BoundingBox, cellsize: float) -> tuple[int, int]:
    """Number of (columns, rows) needed to tile ``bbox`` at ``cellsize`` degrees."""
    if not (isinstance(cellsize, (int, float)) and cellsize > 0):
        raise InvalidArgument("cellsize must be positive", field="cellsize")
    return (
        _cell_count(bbox.max_lon - bbox.min_lon, cellsize),
        _cell_count(bbox.max_lat - bbox.min_lat, cellsize),
    )


@dataclass(frozen=True)
class GridSpec:
    """A rectangular grid over a bounding box at a fixed cell size in degrees.

    ``ncols``/``nrows`` are derived (ceil of span over cellsize), so the grid
    may extend slightly past ``bbox`` on the north/east when the span is not
    an exact multiple of the cell size.
    """

    bbox: BoundingBox
    cellsize: float = DEFAULT_CELLSIZE
    ncols: int = field(init=False)
    nrows: int = field(init=False)

    def __post_init__(self):
        ncols, nrows = grid_dims(self.bbox, self.cellsize)
        object.__setattr__(self, "ncols", ncols)
        object.__setattr__(self, "nrows", nrows)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        """Geographic (lat, lon) of the center of cell (row, col)."""
        lat = self.bbox.min_lat + (self.nrows - 1 - row + 0.5) * self.cellsize
        lon = self.bbox.min_lon + (col + 0.5) * self.cellsize
        return lat, lon

    def same_tiling(self, other: "GridSpec") -> bool:
        """True when both specs cut exactly the same cells.

        The anchor corner, cellsize and cell counts determine every cell
        boundary. The north/east bbox edge does not participate: it is lossy
        under an asc round trip, which snaps it to the grid extent.
        """
        return (
            self.bbox.min_lat == other.bbox.min_lat
            and self.bbox.min_lon == other.bbox.min_lon
            and self.cellsize == other.cellsize
            and self.ncols == other.ncols
            and self.nrows == other.nrows
        )

    def to_record(self) -> dict[str, Any]:
        return {
            "bbox": self.bbox.to_record(),
            "cellsize": self.cellsize,
            "ncols": self.ncols,
            "nrows": self.nrows,
        }

    @classmethod
    def from_record(cls, raw: Mapping[str, Any]) -> "GridSpec":
        return cls(bbox=BoundingBox.from_record(raw["bbox"]), cellsize=float(raw["cellsize"]))


def cell_of(lat: float, lon: float, spec: GridSpec) -> tuple[int, int] | None:
    """Grid cell containing a point, or None when the point is outside.

    Cells are half-open along each axis; row 0 is the northernmost row, and
    points exactly on the northern or western outer edges belong to row 0 /
    col 0. The accepted domain is the grid's snapped coverage (ncols x nrows
    cells anchored at the south-west corner), so every cell center maps back
    to its own cell even when the bbox span is not an exact cell multiple.
    """
    b, s = spec.bbox, spec.cellsize
    if not (math.isfinite(lat) and math.isfinite(lon)):
        return None
    if lon < b.min_lon or lat < b.min_lat:
        return None
    col = math.floor((lon - b.min_lon) / s)
    if col >= spec.ncols:
        return None
    rows_up = math.floor((lat - b.min_lat) / s)
    if rows_up >= spec.nrows:
        if lat > b.min_lat + spec.nrows * s:
            return None
        rows_up = spec.nrows - 1  # northern outer edge folds into row 0
    return spec.nrows - 1 - rows_up, col


@dataclass(frozen=True, eq=False)
class RasterGrid:
    """Grid of real values; shape (nrows, ncols), row 0 northernmost.

    The backing array is float64 and read-only. Non-nodata values must be
    finite. ``values`` may be passed as anything ``np.asarray`` accepts,
    including a flat sequence of length ncols*nrows.
    """

    spec: GridSpec
    values: np.ndarray
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim == 1 and arr.size == self.spec.nrows * self.spec.ncols:
            arr = arr.reshape(self.spec.shape)
        if arr.shape != self.spec.shape:
            raise InvalidArgument(
                f"values shape {arr.shape} does not match grid {self.spec.shape}", field="values"
            )
        arr = arr.copy()
        mask = arr != self.nodata
        if not np.isfinite(arr[mask]).all():
            raise InvalidArgument("non-nodata raster values must be finite", field="values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, spec: GridSpec, nodata: float = DEFAULT_NODATA) -> "RasterGrid":
        return cls(spec=spec, values=np.zeros(spec.shape), nodata=nodata)

    @property
    def data_mask(self) -> np.ndarray:
        return self.values != self.nodata

    def data_total(self) -> float:
        """Sum over non-nodata cells."""
        return float(self.values[self.data_mask].sum())

    def with_values(self, values: np.ndarray) -> "RasterGrid":
        return RasterGrid(spec=self.spec, values=values, nodata=self.nodata)

    def values_equal(self, other: "RasterGrid") -> bool:
        return self.spec == other.spec and bool(np.array_equal(self.values, other.values))


@dataclass(frozen=True)
class TimeWindow:
    """Half-open time interval [start, end) in epoch seconds."""

    start: int
    end: int

    def __post_init__(self):
        if not (isinstance(self.start, int) and isinstance(self.end, int)):
            raise InvalidArgument("window bounds must be integers", field="window")
        if self.start >= self.end:
            raise InvalidArgument(
                f"window start {self.start} must precede end {self.end}", field="window"
            )

    def contains(self, ts: int) -> bool:
        return self.start <= ts < self.end

    def within(self, outer: "TimeWindow") -> bool:
        return outer.start <= self.start and self.end <= outer.end

    @property
    def duration(self) -> int:
        return self.end - self.start

    def to_record(self) -> dict[str, int]:
        return {"start": self.start, "end": self.end}

    @classmethod
    def from_record(cls, raw: Mapping[str, Any]) -> "TimeWindow":
        try:
            return cls(start=int(raw["start"]), end=int(raw["end"]))
        except (KeyError, TypeError) as exc:
            raise InvalidArgument(f"malformed time window: {exc}", field="window") from None


def iter_cells(spec: GridSpec) -> Iterator[tuple[int, int]]:
    """All (row, col) pairs of a grid, row-major."""
    for row in range(spec.nrows):
        for col in range(spec.ncols):
            yield row, col
