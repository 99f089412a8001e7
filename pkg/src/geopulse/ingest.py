"""Record validation and file replay.

Replay stands in for live feed harvesters: it reads an NDJSON event file
and drives a sink (normally the engine's dual-dispatch ingest) at a chosen
multiple of the timestamps' own pace.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping

from .core import GeoEvent
from .errors import DuplicateEvent, IngestFailed, InvalidArgument, ReplayFailed, ValidationError


def validate(raw: Mapping[str, Any] | str) -> GeoEvent:
    """Parse and validate one raw record (JSON text or a decoded object)."""
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"record is not valid JSON: {exc.msg}", field=None) from None
    return GeoEvent.from_record(raw)


@dataclass(frozen=True)
class ReplaySpec:
    """What to replay and how fast.

    speed_factor scales event-time to wall-time: 2.0 plays twice as fast as
    the timestamps, 0 means no pacing at all. loop restarts the file forever
    (each pass after the first is rejected wholesale by duplicate detection
    unless the sink deduplicates differently; useful only for soak runs).
    """

    path: str | Path
    speed_factor: float = 1.0
    loop: bool = False

    def __post_init__(self):
        if self.speed_factor < 0:
            raise InvalidArgument("speed_factor must be >= 0", field="speed_factor")


@dataclass
class ReplayReport:
    accepted: int = 0
    rejected: int = 0


def replay(
    spec: ReplaySpec,
    sink: Callable[[GeoEvent], int],
    on_event: Callable[[GeoEvent, int], None] | None = None,
) -> ReplayReport:
    """Feed a file through ``sink`` in file order, paced by timestamps.

    Lines that fail validation and events the sink refuses (duplicates,
    storage trouble) are counted as rejected; everything else is accepted.
    ``on_event`` observes each accepted (event, seq) pair.
    """
    path = Path(spec.path)
    if not path.is_file():
        raise ReplayFailed(f"replay file {path} does not exist")
    report = ReplayReport()
    while True:
        last_ts: int | None = None
        try:
            fp = open(path, "r", encoding="utf-8")
        except OSError as exc:
            raise ReplayFailed(f"cannot open {path}: {exc}") from exc
        with fp:
            for line in fp:
                if not line.strip():
                    continue
                try:
                    event = validate(line)
                except ValidationError:
                    report.rejected += 1
                    continue
                if spec.speed_factor > 0 and last_ts is not None and event.ts > last_ts:
                    time.sleep((event.ts - last_ts) / spec.speed_factor)
                last_ts = event.ts
                try:
                    seq = sink(event)
                except (DuplicateEvent, IngestFailed):
                    report.rejected += 1
                    continue
                report.accepted += 1
                if on_event is not None:
                    on_event(event, seq)
        if not spec.loop:
            return report
