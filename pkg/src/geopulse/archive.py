"""Append-only event archive plus a registry of immutable reference rasters.

The archive is the system of record: segmented NDJSON log files on disk, an
in-memory copy for scans, and a monotone sequence number per event. Nothing
is ever mutated or deleted; recovery replays the segments. Reference rasters
(baseline population surfaces and the like) are registered once and served
read-only.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterator, Mapping

from .core import BoundingBox, GeoEvent, RasterGrid, TimeWindow
from .errors import (
    DuplicateEvent,
    InvalidArgument,
    NameTaken,
    NotFound,
    StorageFailure,
    ValidationError,
)
from .formats import read_asc_path, write_asc_path

#: Segment rotation threshold, in events.
SEGMENT_SIZE = 10_000

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")
_SEGMENT_RE = re.compile(r"^segment-(\d+)\.ndjson$")


@dataclass(frozen=True)
class ArchiveEntry:
    """One archived event with its arrival sequence number."""

    seq: int
    event: GeoEvent


@dataclass(frozen=True)
class ReferenceRaster:
    name: str
    raster: RasterGrid
    metadata: Mapping[str, str]


class EventArchive:
    """Durable, append-only log of events under ``root/archive``.

    Appends are serialized by an internal lock and assign dense sequence
    numbers 1, 2, 3, ... Scans never block appends: they walk a snapshot
    prefix of the in-memory entry list, which is append-only too.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.archive_dir = self.root / "archive"
        self.reference_dir = self.root / "reference"
        self.archive_dir.mkdir(parents=True, exist_ok=True)
        self.reference_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._entries: list[ArchiveEntry] = []
        self._ids: set[str] = set()
        self._references: dict[str, ReferenceRaster] = {}
        self._segment_file = None
        self._segment_index = 0
        self._segment_count = 0
        self._recover()
        self._load_references()

    # -- recovery ---------------------------------------------------------

    def _segments(self) -> list[tuple[int, Path]]:
        found = []
        for p in self.archive_dir.iterdir():
            m = _SEGMENT_RE.match(p.name)
            if m:
                found.append((int(m.group(1)), p))
        return sorted(found)

    def _recover(self) -> None:
        """Rebuild in-memory state from the segment files.

        A torn final line (crash mid-write) is truncated away so future
        appends start on a clean line; damage anywhere else means the log is
        not trustworthy and recovery refuses to guess.
        """
        segments = self._segments()
        for seg_i, (n, path) in enumerate(segments):
            last_segment = seg_i == len(segments) - 1
            in_segment = 0
            data = path.read_bytes()
            lines = data.splitlines(keepends=True)
            offset = 0
            for line_i, raw_line in enumerate(lines):
                line_start = offset
                offset += len(raw_line)
                text = raw_line.decode("utf-8", errors="replace").strip()
                if not text:
                    continue
                try:
                    raw = json.loads(text)
                    event = GeoEvent.from_record(raw)
                    seq = int(raw["seq"])
                except (json.JSONDecodeError, ValidationError, KeyError, ValueError) as exc:
                    if last_segment and line_i == len(lines) - 1:
                        with open(path, "r+b") as fp:
                            fp.truncate(line_start)
                        break  # torn tail from an interrupted append
                    raise StorageFailure(
                        f"corrupt archive line {line_i + 1} of {path.name}: {exc}"
                    ) from None
                if seq != len(self._entries) + 1:
                    raise StorageFailure(
                        f"sequence gap in {path.name}: expected {len(self._entries) + 1}, got {seq}"
                    )
                if event.event_id in self._ids:
                    raise StorageFailure(f"duplicate event_id {event.event_id!r} in log")
                self._entries.append(ArchiveEntry(seq=seq, event=event))
                self._ids.add(event.event_id)
                in_segment += 1
            else:
                # every line parsed; a valid record missing its newline
                # (crash between write and flush boundaries) gets one so
                # the next append cannot fuse onto it
                if data and not data.endswith(b"\n"):
                    with open(path, "ab") as fp:
                        fp.write(b"\n")
            if last_segment:
                self._segment_index = n
                self._segment_count = in_segment

    def _open_segment(self, index: int):
        path = self.archive_dir / f"segment-{index}.ndjson"
        return open(path, "a", encoding="utf-8")

    def _load_references(self) -> None:
        for asc in sorted(self.reference_dir.glob("*.asc")):
            name = asc.stem
            meta_path = asc.with_suffix(".meta.json")
            metadata: dict[str, str] = {}
            if meta_path.exists():
                with open(meta_path, "r", encoding="utf-8") as fp:
                    metadata = {str(k): str(v) for k, v in json.load(fp).items()}
            raster = read_asc_path(asc)
            self._references[name] = ReferenceRaster(
                name=name, raster=raster, metadata=MappingProxyType(metadata)
            )

    # -- event log --------------------------------------------------------

    def append(self, event: GeoEvent) -> int:
        """Durably append one event; returns its sequence number.

        Duplicate event_ids are rejected without touching the log.
        """
        with self._lock:
            if event.event_id in self._ids:
                raise DuplicateEvent(f"event_id {event.event_id!r} already archived")
            seq = len(self._entries) + 1
            if self._segment_count >= SEGMENT_SIZE and self._segment_file is not None:
                self._segment_file.close()
                self._segment_file = None
            if self._segment_file is None:
                if self._segment_index == 0 or self._segment_count >= SEGMENT_SIZE:
                    self._segment_index += 1
                    self._segment_count = 0
                self._segment_file = self._open_segment(self._segment_index)
            record = {"seq": seq, **event.to_record()}
            try:
                self._segment_file.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n")
                self._segment_file.flush()
            except OSError as exc:
                raise StorageFailure(f"append failed: {exc}") from exc
            self._entries.append(ArchiveEntry(seq=seq, event=event))
            self._ids.add(event.event_id)
            self._segment_count += 1
            return seq

    def high_watermark(self) -> int:
        return len(self._entries)

    def scan(
        self,
        window: TimeWindow | None = None,
        bbox: BoundingBox | None = None,
        up_to_seq: int | None = None,
    ) -> Iterator[ArchiveEntry]:
        """Entries in seq order, filtered by time window, bbox, and seq cap.

        The result is a consistent prefix: entries appended after the scan
        starts are not included.
        """
        limit = len(self._entries)
        if up_to_seq is not None:
            if up_to_seq < 0:
                raise InvalidArgument("up_to_seq must be non-negative", field="up_to_seq")
            limit = min(limit, up_to_seq)
        for i in range(limit):
            entry = self._entries[i]
            ev = entry.event
            if window is not None and not window.contains(ev.ts):
                continue
            if bbox is not None and not bbox.contains(ev.lat, ev.lon):
                continue
            yield entry

    def close(self) -> None:
        with self._lock:
            if self._segment_file is not None:
                self._segment_file.close()
                self._segment_file = None

    # -- reference rasters --------------------------------------------------

    def register_reference(
        self, name: str, raster: RasterGrid, metadata: Mapping[str, str] | None = None
    ) -> None:
        """Persist a named raster; immutable from then on."""
        if not _NAME_RE.match(name or ""):
            raise InvalidArgument(f"invalid reference name {name!r}", field="name")
        metadata = dict(metadata or {})
        if not all(isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()):
            raise InvalidArgument("reference metadata must map strings to strings", field="metadata")
        with self._lock:
            if name in self._references:
                raise NameTaken(f"reference raster {name!r} already registered")
            asc_path = self.reference_dir / f"{name}.asc"
            meta_path = self.reference_dir / f"{name}.meta.json"
            try:
                write_asc_path(raster, asc_path)
                with open(meta_path, "w", encoding="utf-8") as fp:
                    json.dump(metadata, fp, sort_keys=True)
            except OSError as exc:
                raise StorageFailure(f"writing reference {name!r} failed: {exc}") from exc
            self._references[name] = ReferenceRaster(
                name=name, raster=raster, metadata=MappingProxyType(metadata)
            )

    def get_reference(self, name: str) -> ReferenceRaster:
        ref = self._references.get(name)
        if ref is None:
            raise NotFound(f"no reference raster named {name!r}")
        return ref

    def list_references(self) -> list[str]:
        return sorted(self._references)
