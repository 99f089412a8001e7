"""Serving layer: merges batch and realtime state, answers queries.

The merge obeys one law: for any split point k of the event sequence,
batch(<= k) + realtime((k, n]) equals a full recompute batch(<= n), exactly,
for both raster counts and venue bins. The realtime snapshot is pinned to
the batch view's watermark to make the pairing airtight; if compaction has
already moved past that watermark, a newer batch view must exist and the
merge retries against it.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .batch import BatchView, VenueView
from .core import BoundingBox, RasterGrid, TimeWindow
from .errors import (
    InvalidArgument,
    OutOfBounds,
    UnknownView,
    WatermarkMismatch,
)
from .speed import SpeedStore
from .views import ViewDescriptor

AGGREGATES = ("grid", "total", "per_venue", "top_k_cells")


@dataclass(frozen=True)
class PublishedView:
    """One view's batch outputs, swapped in atomically by the rebuild cycle."""

    batch: BatchView
    venue: VenueView

    def __post_init__(self):
        if self.batch.watermark != self.venue.watermark:
            raise InvalidArgument(
                "raster and venue views must share a watermark", field="watermark"
            )


class ServingRegistry:
    """Published batch results by view name; reads are lock-free snapshots."""

    def __init__(self):
        self._lock = threading.Lock()
        self._published: dict[str, PublishedView] = {}

    def publish(self, view: PublishedView) -> None:
        name = view.batch.descriptor.name
        with self._lock:
            prev = self._published.get(name)
            if prev is not None and view.batch.watermark < prev.batch.watermark:
                raise WatermarkMismatch(
                    f"publish would regress {name!r} from watermark "
                    f"{prev.batch.watermark} to {view.batch.watermark}"
                )
            self._published[name] = view

    def get(self, name: str) -> PublishedView:
        view = self._published.get(name)
        if view is None:
            raise UnknownView(f"view {name!r} has no published batch result")
        return view

    def watermark(self, name: str) -> int | None:
        view = self._published.get(name)
        return None if view is None else view.batch.watermark


@dataclass(frozen=True)
class MergedView:
    """Consistent batch + realtime state of one view at a single instant."""

    descriptor: ViewDescriptor
    counts: RasterGrid
    venue_bins: Mapping[str, tuple[int, ...]]
    watermark: int
    as_of_seq: int
    freshness: int

    def total(self) -> float:
        return self.counts.data_total()


def merge(name: str, published: ServingRegistry, speed: SpeedStore) -> MergedView:
    """Current merged state: published batch plus the realtime tail above it."""
    pub = published.get(name)
    for _ in range(64):
        try:
            snap = speed.snapshot(name, floor=pub.batch.watermark)
        except WatermarkMismatch:
            newer = published.get(name)
            if newer.batch.watermark == pub.batch.watermark:
                raise  # floor advanced past every published view: ingestion bug
            pub = newer
            continue
        values = pub.batch.counts.values.copy()
        for (row, col), n in snap.cells.items():
            values[row, col] += n
        bins: dict[str, list[int]] = {v: list(b) for v, b in pub.venue.bins.items()}
        n_bins = pub.batch.descriptor.n_bins
        for (venue, idx), n in snap.venue_bins.items():
            bins.setdefault(venue, [0] * n_bins)[idx] += n
        return MergedView(
            descriptor=pub.batch.descriptor,
            counts=pub.batch.counts.with_values(values),
            venue_bins={v: tuple(b) for v, b in bins.items()},
            watermark=pub.batch.watermark,
            as_of_seq=max(pub.batch.watermark, snap.ceiling),
            freshness=int(time.time()),
        )
    raise WatermarkMismatch(f"merge of {name!r} could not settle")


@dataclass(frozen=True)
class QueryRequest:
    """One structured query against a named view."""

    view: str
    aggregate: str
    sub_bbox: BoundingBox | None = None
    sub_window: TimeWindow | None = None
    k: int = 1

    def __post_init__(self):
        if self.aggregate not in AGGREGATES:
            raise InvalidArgument(
                f"aggregate must be one of {', '.join(AGGREGATES)}", field="aggregate"
            )
        if self.aggregate == "top_k_cells" and self.k < 1:
            raise InvalidArgument("k must be at least 1", field="k")
        if self.sub_window is not None and self.aggregate != "per_venue":
            raise InvalidArgument(
                "sub_window applies only to the per_venue aggregate", field="sub_window"
            )
        if self.sub_bbox is not None and self.aggregate == "per_venue":
            raise InvalidArgument(
                "per_venue ignores geometry; sub_bbox not applicable", field="sub_bbox"
            )

    @classmethod
    def from_record(cls, raw: Mapping[str, Any]) -> "QueryRequest":
        if not isinstance(raw, Mapping):
            raise InvalidArgument("query must be a JSON object", field=None)
        if "view" not in raw or not isinstance(raw["view"], str):
            raise InvalidArgument("view name required", field="view")
        if "aggregate" not in raw:
            raise InvalidArgument("aggregate required", field="aggregate")
        sub_bbox = raw.get("sub_bbox")
        sub_window = raw.get("sub_window")
        k = raw.get("k", 1)
        if not isinstance(k, int) or isinstance(k, bool):
            raise InvalidArgument("k must be an integer", field="k")
        return cls(
            view=raw["view"],
            aggregate=str(raw["aggregate"]),
            sub_bbox=BoundingBox.from_record(sub_bbox) if sub_bbox is not None else None,
            sub_window=TimeWindow.from_record(sub_window) if sub_window is not None else None,
            k=k,
        )


@dataclass(frozen=True)
class QueryResult:
    """Answer computed from one merged snapshot."""

    view: str
    aggregate: str
    watermark: int
    as_of_seq: int
    freshness: int
    value: float | None = None
    grid: list[list[float]] | None = None
    grid_spec: dict | None = None
    cells: list[dict] | None = None
    venues: dict[str, list[int]] | None = None
    bin_starts: list[int] | None = None
    bin_width: int | None = None

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "view": self.view,
            "aggregate": self.aggregate,
            "watermark": self.watermark,
            "as_of_seq": self.as_of_seq,
            "freshness": self.freshness,
        }
        if self.value is not None:
            rec["value"] = self.value
        if self.grid is not None:
            rec["grid"] = self.grid
            rec["grid_spec"] = self.grid_spec
        if self.cells is not None:
            rec["cells"] = self.cells
        if self.venues is not None:
            rec["venues"] = self.venues
            rec["bin_starts"] = self.bin_starts
            rec["bin_width"] = self.bin_width
        return rec


def _slice_indices(descriptor: ViewDescriptor, sub: BoundingBox) -> tuple[range, range]:
    """Row/col ranges whose cell centers fall inside ``sub`` (closed box)."""
    spec, b, s = descriptor.spec, descriptor.spec.bbox, descriptor.spec.cellsize
    if not sub.within(b):
        raise OutOfBounds("sub_bbox extends outside the view extent", field="sub_bbox")
    # center of col c sits at min_lon + (c + 0.5) s; solve for inclusion
    c0 = math.ceil((sub.min_lon - b.min_lon) / s - 0.5 - 1e-12)
    c1 = math.floor((sub.max_lon - b.min_lon) / s - 0.5 + 1e-12)
    up0 = math.ceil((sub.min_lat - b.min_lat) / s - 0.5 - 1e-12)
    up1 = math.floor((sub.max_lat - b.min_lat) / s - 0.5 + 1e-12)
    c0, c1 = max(0, c0), min(spec.ncols - 1, c1)
    up0, up1 = max(0, up0), min(spec.nrows - 1, up1)
    r0 = spec.nrows - 1 - up1
    r1 = spec.nrows - 1 - up0
    if c0 > c1 or r0 > r1:
        return range(0), range(0)
    return range(r0, r1 + 1), range(c0, c1 + 1)


def _spec_record(bbox: BoundingBox, cellsize: float, ncols: int, nrows: int) -> dict:
    return {
        "bbox": bbox.to_record(),
        "cellsize": cellsize,
        "ncols": ncols,
        "nrows": nrows,
    }


def _sub_spec(descriptor: ViewDescriptor, rows: range, cols: range) -> dict | None:
    if not rows or not cols:
        return None
    b, s = descriptor.spec.bbox, descriptor.spec.cellsize
    nrows = descriptor.spec.nrows
    bbox = BoundingBox(
        min_lat=b.min_lat + (nrows - 1 - rows[-1]) * s,
        min_lon=b.min_lon + cols[0] * s,
        max_lat=b.min_lat + (nrows - rows[0]) * s,
        max_lon=b.min_lon + (cols[-1] + 1) * s,
    )
    return _spec_record(bbox, s, len(cols), len(rows))


def query(req: QueryRequest, merged: MergedView) -> QueryResult:
    """Evaluate a request against one merged snapshot."""
    d = merged.descriptor
    meta = dict(
        view=req.view,
        aggregate=req.aggregate,
        watermark=merged.watermark,
        as_of_seq=merged.as_of_seq,
        freshness=merged.freshness,
    )
    if req.aggregate in ("grid", "total", "top_k_cells"):
        if req.sub_bbox is not None:
            rows, cols = _slice_indices(d, req.sub_bbox)
        else:
            rows, cols = range(d.spec.nrows), range(d.spec.ncols)
        if rows and cols:
            sub = merged.counts.values[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
        else:
            sub = np.zeros((0, 0))
        if req.aggregate == "total":
            return QueryResult(value=float(sub.sum()), **meta)
        if req.aggregate == "grid":
            spec_rec = (
                _sub_spec(d, rows, cols)
                if req.sub_bbox is not None
                else _spec_record(d.spec.bbox, d.spec.cellsize, d.spec.ncols, d.spec.nrows)
            )
            return QueryResult(grid=[list(map(float, r)) for r in sub], grid_spec=spec_rec, **meta)
        # top_k_cells: rank by count desc, ties by (row, col) ascending
        flat = [
            (float(sub[i, j]), rows[0] + i, cols[0] + j)
            for i in range(sub.shape[0])
            for j in range(sub.shape[1])
        ]
        flat.sort(key=lambda t: (-t[0], t[1], t[2]))
        top = flat[: req.k]
        return QueryResult(
            cells=[{"row": r, "col": c, "count": v} for v, r, c in top], **meta
        )

    # per_venue
    window = d.window if req.sub_window is None else req.sub_window
    if req.sub_window is not None and not req.sub_window.within(d.window):
        raise OutOfBounds("sub_window extends outside the view window", field="sub_window")
    n_bins = d.n_bins
    starts = [d.window.start + i * d.bin_width for i in range(n_bins)]
    keep = [
        i
        for i, s0 in enumerate(starts)
        if s0 >= window.start and s0 + d.bin_width <= window.end
    ]
    venues = {
        v: [int(bins[i]) for i in keep] for v, bins in sorted(merged.venue_bins.items())
    }
    return QueryResult(
        venues=venues,
        bin_starts=[starts[i] for i in keep],
        bin_width=d.bin_width,
        **meta,
    )
