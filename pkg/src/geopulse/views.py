"""View descriptors and the durable descriptor registry.

A descriptor names a materialized aggregation: a grid over a bounding box, a
time window, optional source and scenario filters, a venue-bin width, and
the venue ids that should always appear in venue tables. Both the batch
builder and the realtime layer route events through the descriptor's own
predicate methods, so the two layers can never disagree about which events
count where. That shared routing is what makes batch/realtime merges exact.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping

from .analytics import ScenarioSpec
from .core import GeoEvent, GridSpec, Source, TimeWindow, cell_of
from .errors import BinMismatch, InvalidArgument, NameTaken, UnknownView

DEFAULT_BIN_WIDTH = 1800

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


@dataclass(frozen=True)
class ViewDescriptor:
    """Immutable definition of one view."""

    name: str
    spec: GridSpec
    window: TimeWindow
    source_filter: Source | None = None
    scenario: ScenarioSpec | None = None
    bin_width: int = DEFAULT_BIN_WIDTH
    venues: tuple[str, ...] = ()

    def __post_init__(self):
        if not _NAME_RE.match(self.name or ""):
            raise InvalidArgument(f"invalid view name {self.name!r}", field="name")
        if not (isinstance(self.bin_width, int) and self.bin_width > 0):
            raise InvalidArgument("bin_width must be a positive integer", field="bin_width")
        if self.window.duration % self.bin_width != 0:
            raise BinMismatch(
                f"bin width {self.bin_width} does not tile a {self.window.duration}s window"
            )
        if self.scenario is not None and not self.scenario.window.within(self.window):
            raise InvalidArgument(
                "scenario window must lie within the view window", field="scenario"
            )
        if len(set(self.venues)) != len(self.venues):
            raise InvalidArgument("venue list contains duplicates", field="venues")

    @property
    def n_bins(self) -> int:
        return self.window.duration // self.bin_width

    def bin_index(self, ts: int) -> int:
        return (ts - self.window.start) // self.bin_width

    # -- event routing: the single definition of "this event counts here" --

    def admits(self, event: GeoEvent) -> bool:
        """Time/source/scenario filters, before any spatial test."""
        if not self.window.contains(event.ts):
            return False
        if self.source_filter is not None and event.source != self.source_filter:
            return False
        if self.scenario is not None and not self.scenario.window.contains(event.ts):
            return False
        return True

    def route_cell(self, event: GeoEvent) -> tuple[int, int] | None:
        """Grid cell this event increments, or None."""
        if not self.admits(event):
            return None
        return cell_of(event.lat, event.lon, self.spec)

    def route_venue(self, event: GeoEvent) -> str | None:
        """Venue this event counts toward, or None.

        Venue bins are keyed by venue identity, not position: an admitted
        event with a venue_id counts toward that venue regardless of which
        cell (if any) it lands in.
        """
        if event.venue_id is None or not self.admits(event):
            return None
        return event.venue_id

    def route_venue_bin(self, event: GeoEvent) -> tuple[str, int] | None:
        """(venue_id, bin index) this event increments, or None."""
        venue = self.route_venue(event)
        if venue is None:
            return None
        return venue, self.bin_index(event.ts)

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "name": self.name,
            "spec": self.spec.to_record(),
            "window": self.window.to_record(),
            "bin_width": self.bin_width,
        }
        if self.source_filter is not None:
            rec["source_filter"] = self.source_filter.value
        if self.scenario is not None:
            rec["scenario"] = self.scenario.to_record()
        if self.venues:
            rec["venues"] = list(self.venues)
        return rec

    @classmethod
    def from_record(cls, raw: Mapping[str, Any]) -> "ViewDescriptor":
        try:
            source = raw.get("source_filter")
            scenario = raw.get("scenario")
            return cls(
                name=str(raw["name"]),
                spec=GridSpec.from_record(raw["spec"]),
                window=TimeWindow.from_record(raw["window"]),
                source_filter=Source(source) if source is not None else None,
                scenario=ScenarioSpec.from_record(scenario) if scenario is not None else None,
                bin_width=int(raw.get("bin_width", DEFAULT_BIN_WIDTH)),
                venues=tuple(str(v) for v in raw.get("venues", ())),
            )
        except KeyError as exc:
            raise InvalidArgument(f"descriptor missing field {exc.args[0]}", field=str(exc.args[0]))
        except ValueError as exc:
            raise InvalidArgument(f"malformed descriptor: {exc}", field=None) from None


class ViewRegistry:
    """Named descriptors, persisted to ``views.json`` under the data root.

    Registration is write-once per name; the on-disk file is rewritten
    atomically on every change and reloaded on startup.
    """

    def __init__(self, root: str | Path):
        self.path = Path(root) / "views.json"
        self._lock = threading.Lock()
        self._descriptors: dict[str, ViewDescriptor] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fp:
                doc = json.load(fp)
            for raw in doc.get("views", []):
                d = ViewDescriptor.from_record(raw)
                self._descriptors[d.name] = d

    def _persist(self) -> None:
        doc = {"views": [d.to_record() for d in self._descriptors.values()]}
        tmp = self.path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fp:
            json.dump(doc, fp, indent=2, sort_keys=True)
        tmp.replace(self.path)

    def register(self, descriptor: ViewDescriptor) -> None:
        with self._lock:
            if descriptor.name in self._descriptors:
                raise NameTaken(f"view {descriptor.name!r} already registered")
            self._descriptors[descriptor.name] = descriptor
            self._persist()

    def get(self, name: str) -> ViewDescriptor:
        d = self._descriptors.get(name)
        if d is None:
            raise UnknownView(f"no view named {name!r}")
        return d

    def __contains__(self, name: str) -> bool:
        return name in self._descriptors

    def __iter__(self) -> Iterator[ViewDescriptor]:
        return iter(list(self._descriptors.values()))

    def names(self) -> list[str]:
        return sorted(self._descriptors)
