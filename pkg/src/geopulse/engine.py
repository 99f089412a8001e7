"""The assembled system: archive + batch + realtime + serving over one data dir.

The engine owns the single ingestion serialization point. An ingest call
appends to the archive and applies to the realtime layer under one lock, so
by the time it acknowledges, the event is durably archived AND visible to
merged queries — and a batch rebuild watermark read under that same lock can
never land between the two halves.
"""

from __future__ import annotations

import logging
import threading
import time
from pathlib import Path
from typing import Any, Mapping

from . import batch as batch_mod
from .analytics import OccupancyCurve, dasymetric_add, kde, occupancy_curve, scale_to_population
from .archive import EventArchive
from .core import GeoEvent, RasterGrid
from .errors import (
    BinMismatch,
    IngestFailed,
    InvalidArgument,
    NoObservations,
    StorageFailure,
    UnknownView,
)
from .ingest import validate
from .serving import (
    MergedView,
    PublishedView,
    QueryRequest,
    QueryResult,
    ServingRegistry,
    merge,
    query,
)
from .speed import SpeedStore
from .views import ViewDescriptor, ViewRegistry

log = logging.getLogger("geopulse.engine")

SECONDS_PER_DAY = 86_400


class Engine:
    """Everything behind the HTTP API and CLI, bound to one data directory."""

    def __init__(self, root: str | Path, recompute_interval: float = 30.0):
        if recompute_interval <= 0:
            raise InvalidArgument("recompute_interval must be positive", field="recompute_interval")
        self.root = Path(root)
        self.recompute_interval = recompute_interval
        self.archive = EventArchive(self.root)
        self.registry = ViewRegistry(self.root)
        self.speed = SpeedStore()
        self.published = ServingRegistry()
        self._ingest_lock = threading.Lock()
        self._loop_thread: threading.Thread | None = None
        self._stop = threading.Event()
        for descriptor in self.registry:
            self._activate(descriptor)

    # -- view lifecycle -----------------------------------------------------

    def _activate(self, descriptor: ViewDescriptor) -> None:
        """Bring a registered descriptor live: realtime tracking + first build.

        The realtime floor is pinned to the archive watermark under the
        ingest lock, then the batch half is built over exactly that prefix.
        """
        with self._ingest_lock:
            watermark = self.archive.high_watermark()
            self.speed.register(descriptor, watermark)
        batch_view, venue_view = batch_mod.build_full(self.archive, descriptor, up_to=watermark)
        self.published.publish(PublishedView(batch=batch_view, venue=venue_view))

    def register_view(self, descriptor: ViewDescriptor) -> int:
        """Persist a new descriptor and activate it; returns its first watermark."""
        self.registry.register(descriptor)
        self._activate(descriptor)
        return self.published.get(descriptor.name).batch.watermark

    def views_status(self) -> list[dict[str, Any]]:
        out = []
        for descriptor in self.registry:
            rec = descriptor.to_record()
            rec["watermark"] = self.published.watermark(descriptor.name)
            try:
                snap = self.speed.snapshot(descriptor.name)
                rec["realtime_ceiling"] = snap.ceiling
            except UnknownView:
                rec["realtime_ceiling"] = None
            out.append(rec)
        return out

    # -- ingestion ------------------------------------------------------------

    def ingest(self, event: GeoEvent) -> int:
        """Dual dispatch: archive append then realtime apply, atomically.

        After this returns, the event is in both layers; after any error it
        is in neither (append failures leave the realtime layer untouched,
        and append itself is all-or-nothing).
        """
        with self._ingest_lock:
            try:
                seq = self.archive.append(event)
            except StorageFailure as exc:
                raise IngestFailed(str(exc)) from exc
            self.speed.apply(event, seq)
            return seq

    def ingest_record(self, raw: Mapping[str, Any] | str) -> int:
        return self.ingest(validate(raw))

    # -- batch recompute -------------------------------------------------------

    def rebuild_view(self, name: str) -> int:
        """One full recompute + publish + compact cycle for one view."""
        descriptor = self.registry.get(name)
        with self._ingest_lock:
            watermark = self.archive.high_watermark()
        batch_view, venue_view = batch_mod.build_full(self.archive, descriptor, up_to=watermark)
        self.published.publish(PublishedView(batch=batch_view, venue=venue_view))
        # publish first, then drop the now-covered realtime prefix
        self.speed.compact(name, watermark)
        return watermark

    def rebuild_all(self) -> dict[str, int]:
        marks = {}
        for name in self.registry.names():
            try:
                marks[name] = self.rebuild_view(name)
            except Exception:
                log.exception("rebuild of view %r failed; keeping previous result", name)
        return marks

    def start_recompute_loop(self) -> None:
        if self._loop_thread is not None:
            return
        self._stop.clear()

        def run():
            while not self._stop.wait(self.recompute_interval):
                self.rebuild_all()

        self._loop_thread = threading.Thread(target=run, name="recompute-loop", daemon=True)
        self._loop_thread.start()

    def stop_recompute_loop(self) -> None:
        if self._loop_thread is None:
            return
        self._stop.set()
        self._loop_thread.join(timeout=10)
        self._loop_thread = None

    # -- reads -------------------------------------------------------------

    def merged(self, name: str) -> MergedView:
        self.registry.get(name)  # unknown names fail here with a clear error
        return merge(name, self.published, self.speed)

    def query(self, req: QueryRequest) -> QueryResult:
        return query(req, self.merged(req.view))

    def query_record(self, raw: Mapping[str, Any]) -> QueryResult:
        return self.query(QueryRequest.from_record(raw))

    # -- analytics surfaces ---------------------------------------------------

    def layer_raster(
        self,
        name: str,
        layer: str = "raw",
        radius: int = 2,
        population: float | None = None,
        baseline: str | None = None,
    ) -> RasterGrid:
        """Merged counts, optionally smoothed or carried onto a baseline.

        raw: merged counts. kde: smoothed counts. final: smoothed counts
        scaled to ``population`` and added onto the named reference raster.
        """
        merged_view = self.merged(name)
        counts = merged_view.counts
        if layer == "raw":
            return counts
        if layer == "kde":
            return kde(counts, radius=radius)
        if layer == "final":
            if population is None:
                raise InvalidArgument("layer=final requires population", field="population")
            if baseline is None:
                raise InvalidArgument("layer=final requires a baseline name", field="baseline")
            base = self.archive.get_reference(baseline).raster
            modeled = scale_to_population(kde(counts, radius=radius), population)
            return dasymetric_add(base, modeled)
        raise InvalidArgument(f"unknown layer {layer!r}", field="layer")

    def admitted_events(self, name: str) -> list[GeoEvent]:
        """Events the named view admits (time/source/scenario), in seq order."""
        descriptor = self.registry.get(name)
        return [
            e.event
            for e in self.archive.scan(window=descriptor.window)
            if descriptor.admits(e.event)
        ]

    def occupancy(
        self,
        venue_id: str,
        bin_width: int = 1800,
        confidence: float = 0.95,
        seed: int = 0,
        resamples: int = 1000,
    ) -> OccupancyCurve:
        """Occupancy curve for one venue over every archived day observing it.

        Days are UTC days; bins are time-of-day bins of ``bin_width``
        seconds, which must tile a day exactly.
        """
        if bin_width <= 0 or SECONDS_PER_DAY % bin_width != 0:
            raise BinMismatch(f"bin width {bin_width} does not tile a day")
        n_bins = SECONDS_PER_DAY // bin_width
        days: dict[int, list[int]] = {}
        for entry in self.archive.scan():
            ev = entry.event
            if ev.venue_id != venue_id:
                continue
            day = ev.ts // SECONDS_PER_DAY
            offset = ev.ts - day * SECONDS_PER_DAY
            days.setdefault(day, [0] * n_bins)[offset // bin_width] += 1
        if not days:
            raise NoObservations(f"no archived events for venue {venue_id!r}")
        per_day = [days[d] for d in sorted(days)]
        return occupancy_curve(
            per_day,
            venue_id=venue_id,
            bin_width=bin_width,
            confidence=confidence,
            seed=seed,
            resamples=resamples,
        )

    def close(self) -> None:
        self.stop_recompute_loop()
        self.archive.close()

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
