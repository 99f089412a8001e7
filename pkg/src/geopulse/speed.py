"""Realtime layer: small in-memory per-view aggregates above the batch floor.

Each registered view keeps sparse cell and venue-bin counters plus a ring of
per-event deltas. The ring is what makes the layer exact rather than
approximate: raising the floor subtracts precisely the contributions of the
compacted sequence range, and a snapshot can be pinned to any floor at or
above the current one by subtracting the ring prefix. Counts therefore
always cover exactly the events with floor < seq <= ceiling that pass the
view's filters.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .core import GeoEvent
from .errors import FloorRegression, OutOfOrderSeq, UnknownView, WatermarkMismatch
from .views import ViewDescriptor

Cell = tuple[int, int]
VenueBin = tuple[str, int]


@dataclass(frozen=True)
class RealtimeView:
    """Immutable snapshot of one view's realtime state."""

    name: str
    floor: int
    ceiling: int
    cells: Mapping[Cell, int]
    venue_bins: Mapping[VenueBin, int]

    def total(self) -> int:
        return sum(self.cells.values())


@dataclass
class _Delta:
    seq: int
    cell: Cell | None
    venue_bin: VenueBin | None


@dataclass
class _ViewState:
    descriptor: ViewDescriptor
    floor: int
    ceiling: int
    cells: dict[Cell, int] = field(default_factory=dict)
    venue_bins: dict[VenueBin, int] = field(default_factory=dict)
    ring: deque[_Delta] = field(default_factory=deque)


def _dec(counts: dict, key) -> None:
    left = counts[key] - 1
    if left:
        counts[key] = left
    else:
        del counts[key]


class SpeedStore:
    """All realtime views, guarded by one lock.

    apply() is called from the single ingestion serialization point;
    snapshot() and compact() may be called concurrently from query and
    recompute threads.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._views: dict[str, _ViewState] = {}

    def register(self, descriptor: ViewDescriptor, watermark: int) -> None:
        """Start tracking a view; empty, with floor = ceiling = ``watermark``."""
        with self._lock:
            self._views[descriptor.name] = _ViewState(
                descriptor=descriptor, floor=watermark, ceiling=watermark
            )

    def unregister(self, name: str) -> None:
        with self._lock:
            self._views.pop(name, None)

    def names(self) -> list[str]:
        with self._lock:
            return sorted(self._views)

    def apply(self, event: GeoEvent, seq: int) -> None:
        """Fold one archived event into every view it passes.

        Ceilings advance for all views whether or not the event counts
        anywhere. A seq at or below any ceiling means the caller broke
        arrival order; nothing is applied.
        """
        with self._lock:
            for state in self._views.values():
                if seq <= state.ceiling:
                    raise OutOfOrderSeq(
                        f"seq {seq} not above ceiling {state.ceiling} of view "
                        f"{state.descriptor.name!r}"
                    )
            for state in self._views.values():
                d = state.descriptor
                cell = d.route_cell(event)
                vbin = d.route_venue_bin(event)
                if cell is not None:
                    state.cells[cell] = state.cells.get(cell, 0) + 1
                if vbin is not None:
                    state.venue_bins[vbin] = state.venue_bins.get(vbin, 0) + 1
                if cell is not None or vbin is not None:
                    state.ring.append(_Delta(seq=seq, cell=cell, venue_bin=vbin))
                state.ceiling = seq

    def _get(self, name: str) -> _ViewState:
        state = self._views.get(name)
        if state is None:
            raise UnknownView(f"no realtime view named {name!r}")
        return state

    def snapshot(self, name: str, floor: int | None = None) -> RealtimeView:
        """Consistent copy of a view, optionally pinned to a higher floor.

        Pinning to floor w subtracts the ring prefix with seq <= w, yielding
        exactly the contributions of (w, ceiling]. A w below the current
        floor is unsatisfiable (those deltas were compacted away) and raises
        WatermarkMismatch; a w at or above the ceiling gives an empty view
        positioned at w.
        """
        with self._lock:
            state = self._get(name)
            if floor is None or floor == state.floor:
                return RealtimeView(
                    name=name,
                    floor=state.floor,
                    ceiling=state.ceiling,
                    cells=MappingProxyType(dict(state.cells)),
                    venue_bins=MappingProxyType(dict(state.venue_bins)),
                )
            if floor < state.floor:
                raise WatermarkMismatch(
                    f"floor {floor} precedes compacted floor {state.floor} of {name!r}"
                )
            if floor >= state.ceiling:
                return RealtimeView(
                    name=name, floor=floor, ceiling=floor,
                    cells=MappingProxyType({}), venue_bins=MappingProxyType({}),
                )
            cells = dict(state.cells)
            venue_bins = dict(state.venue_bins)
            for delta in state.ring:
                if delta.seq > floor:
                    break
                if delta.cell is not None:
                    _dec(cells, delta.cell)
                if delta.venue_bin is not None:
                    _dec(venue_bins, delta.venue_bin)
            return RealtimeView(
                name=name,
                floor=floor,
                ceiling=state.ceiling,
                cells=MappingProxyType(cells),
                venue_bins=MappingProxyType(venue_bins),
            )

    def compact(self, name: str, new_floor: int) -> None:
        """Discard contributions with seq <= new_floor and raise the floor.

        A new_floor beyond the ceiling empties the view and positions both
        bounds at new_floor.
        """
        with self._lock:
            state = self._get(name)
            if new_floor < state.floor:
                raise FloorRegression(
                    f"floor {new_floor} precedes current floor {state.floor} of {name!r}"
                )
            if new_floor >= state.ceiling:
                state.cells.clear()
                state.venue_bins.clear()
                state.ring.clear()
                state.floor = max(new_floor, state.ceiling)
                state.ceiling = state.floor
                return
            while state.ring and state.ring[0].seq <= new_floor:
                delta = state.ring.popleft()
                if delta.cell is not None:
                    _dec(state.cells, delta.cell)
                if delta.venue_bin is not None:
                    _dec(state.venue_bins, delta.venue_bin)
            state.floor = new_floor
