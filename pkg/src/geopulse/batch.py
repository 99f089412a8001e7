"""Batch layer: full recomputation of views from the archive.

No incremental maintenance here, deliberately. A batch view is a pure
function of the archive prefix up to its watermark, so rebuilding from
scratch is always safe and always produces bit-identical results for the
same prefix. The background rebuild cadence lives in the engine; this
module is just the (stateless) builders.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .archive import EventArchive
from .core import RasterGrid
from .errors import BinMismatch, InvalidArgument
from .views import ViewDescriptor


@dataclass(frozen=True, eq=False)
class BatchView:
    """Raster counts for one view, recomputed from the archive up to ``watermark``."""

    descriptor: ViewDescriptor
    watermark: int
    counts: RasterGrid
    built_at: int

    def same_result(self, other: "BatchView") -> bool:
        """Build-for-build equality; ignores the build timestamp."""
        return (
            self.descriptor == other.descriptor
            and self.watermark == other.watermark
            and self.counts.values_equal(other.counts)
        )


@dataclass(frozen=True)
class VenueView:
    """Per-venue, per-bin counts for one view up to ``watermark``.

    Bins tile the descriptor window exactly. Venues registered on the
    descriptor always appear, all-zero if silent; venues only seen in events
    appear once they have a count.
    """

    descriptor_name: str
    window_start: int
    bin_width: int
    bins: Mapping[str, tuple[int, ...]]
    watermark: int

    def venue_total(self, venue_id: str) -> int:
        return sum(self.bins.get(venue_id, ()))


def _check_up_to(archive: EventArchive, up_to: int | None) -> int:
    hw = archive.high_watermark()
    if up_to is None:
        return hw
    if not (0 <= up_to <= hw):
        raise InvalidArgument(
            f"up_to {up_to} outside archive range [0, {hw}]", field="up_to"
        )
    return up_to


def build_batch_view(
    archive: EventArchive, descriptor: ViewDescriptor, up_to: int | None = None
) -> BatchView:
    """Rasterize the archive prefix through the descriptor's routing."""
    up_to = _check_up_to(archive, up_to)
    counts = np.zeros(descriptor.spec.shape)
    for entry in archive.scan(window=descriptor.window, up_to_seq=up_to):
        cell = descriptor.route_cell(entry.event)
        if cell is not None:
            counts[cell] += 1.0
    return BatchView(
        descriptor=descriptor,
        watermark=up_to,
        counts=RasterGrid(spec=descriptor.spec, values=counts),
        built_at=int(time.time()),
    )


def build_venue_view(
    archive: EventArchive,
    descriptor: ViewDescriptor,
    bin_width: int | None = None,
    up_to: int | None = None,
) -> VenueView:
    """Bin venue-tagged events over the descriptor window.

    ``bin_width`` defaults to the descriptor's own width (the one the
    realtime layer mirrors); an override must still tile the window.
    """
    up_to = _check_up_to(archive, up_to)
    width = descriptor.bin_width if bin_width is None else bin_width
    if width <= 0 or descriptor.window.duration % width != 0:
        raise BinMismatch(
            f"bin width {width} does not tile a {descriptor.window.duration}s window"
        )
    n_bins = descriptor.window.duration // width
    bins: dict[str, list[int]] = {v: [0] * n_bins for v in descriptor.venues}
    for entry in archive.scan(window=descriptor.window, up_to_seq=up_to):
        venue = descriptor.route_venue(entry.event)
        if venue is None:
            continue
        idx = (entry.event.ts - descriptor.window.start) // width
        bins.setdefault(venue, [0] * n_bins)[idx] += 1
    return VenueView(
        descriptor_name=descriptor.name,
        window_start=descriptor.window.start,
        bin_width=width,
        bins=MappingProxyType({v: tuple(b) for v, b in bins.items()}),
        watermark=up_to,
    )


def build_full(
    archive: EventArchive, descriptor: ViewDescriptor, up_to: int | None = None
) -> tuple[BatchView, VenueView]:
    """Raster and venue views from one scan, at one watermark."""
    up_to = _check_up_to(archive, up_to)
    counts = np.zeros(descriptor.spec.shape)
    n_bins = descriptor.n_bins
    bins: dict[str, list[int]] = {v: [0] * n_bins for v in descriptor.venues}
    for entry in archive.scan(window=descriptor.window, up_to_seq=up_to):
        ev = entry.event
        cell = descriptor.route_cell(ev)
        if cell is not None:
            counts[cell] += 1.0
        vbin = descriptor.route_venue_bin(ev)
        if vbin is not None:
            venue, idx = vbin
            bins.setdefault(venue, [0] * n_bins)[idx] += 1
    batch = BatchView(
        descriptor=descriptor,
        watermark=up_to,
        counts=RasterGrid(spec=descriptor.spec, values=counts),
        built_at=int(time.time()),
    )
    venue_view = VenueView(
        descriptor_name=descriptor.name,
        window_start=descriptor.window.start,
        bin_width=descriptor.bin_width,
        bins=MappingProxyType({v: tuple(b) for v, b in bins.items()}),
        watermark=up_to,
    )
    return batch, venue_view
