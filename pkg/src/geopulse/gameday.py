"""Synthetic "game day" scenario: seeded events with a ground-truth manifest.

Eight identically-distributed days of venue check-ins and tweets around a
stadium, arrival rates ramping to a noon kickoff. The last day carries the
scenario windows (pre-game and game hours). Every event sits exactly at its
venue's coordinates, so the manifest's per-venue, per-bin counts are a
complete ground truth: any raster, venue table, or total the system produces
can be recomputed by folding the manifest.

All randomness flows from one seed through three independent generator
streams (geometry, counts, event placement), so outputs are byte-identical
across runs and the count model can be sampled without materializing events.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .analytics import ScenarioSpec
from .core import (
    DEFAULT_CELLSIZE,
    BoundingBox,
    GeoEvent,
    GridSpec,
    RasterGrid,
    Source,
    TimeWindow,
    cell_of,
)
from .formats import event_to_json_line, write_asc_path
from .views import ViewDescriptor

# Spherical-earth meters per degree of latitude.
M_PER_DEG_LAT = math.pi * 6_371_000.0 / 180.0

CENTER_LAT = 35.95
CENTER_LON = -83.92
RADIUS_MILES = 1.5
RADIUS_M = RADIUS_MILES * 1609.344

N_VENUES = 95
STADIUM_ID = "stadium"
BIN_WIDTH = 1800
BINS_PER_DAY = 86_400 // BIN_WIDTH

#: 2013-11-02 00:00:00 UTC, an exact UTC midnight.
DAY0_START = 1_383_350_400
DEFAULT_DAYS = 8
KICKOFF_HOUR = 12

ATTENDANCE = {"game-hours": 20_000.0, "non-game-hours": 2_000.0}
BASELINE_NAME = "baseline-night"
BASELINE_TOTAL = 40_000.0

EVENTS_FILE = "events.ndjson"
MANIFEST_FILE = "manifest.json"
BASELINE_FILE = f"{BASELINE_NAME}.asc"
VIEWS_FILE = "views.json"


@dataclass(frozen=True)
class Venue:
    venue_id: str
    lat: float
    lon: float


def scenario_bbox() -> BoundingBox:
    """The 1.5-mile-radius box around the stadium, in degrees."""
    dlat = RADIUS_M / M_PER_DEG_LAT
    dlon = dlat / math.cos(math.radians(CENTER_LAT))
    return BoundingBox(
        min_lat=CENTER_LAT - dlat,
        min_lon=CENTER_LON - dlon,
        max_lat=CENTER_LAT + dlat,
        max_lon=CENTER_LON + dlon,
    )


def _ambient_shape(bins: np.ndarray) -> np.ndarray:
    # daily background activity, peaking mid-afternoon (bin 28 = 14:00)
    return 0.2 + 0.8 * np.exp(-(((bins - 28.0) / 10.0) ** 2))


#: Stadium gates: open 08:00, closed from 23:00 (bins 16..45).
STADIUM_OPEN_BIN = 16
STADIUM_CLOSE_BIN = 46


def _stadium_curve(bins: np.ndarray) -> np.ndarray:
    # Busy plateau while the gates are open, strong surge around the noon
    # kickoff (bin 24), exactly zero outside operating hours. Rates are kept
    # high so per-day peak normalization is statistically stable.
    open_mask = (bins >= STADIUM_OPEN_BIN) & (bins < STADIUM_CLOSE_BIN)
    curve = 25.0 + 130.0 * np.exp(-(((bins - 24.0) / 2.2) ** 2))
    return np.where(open_mask, curve, 0.0)


@dataclass(frozen=True)
class Gameday:
    """The full synthetic scenario, in memory."""

    seed: int
    days: int
    spec: GridSpec
    stadium: Venue
    venues: tuple[Venue, ...]  # stadium first, then venue-01..venue-95
    rate_curves: dict[str, np.ndarray]  # venue -> mean arrivals per bin
    counts: dict[str, np.ndarray]  # venue -> (days, bins) sampled arrivals
    events: tuple[GeoEvent, ...]

    @property
    def kickoff_day_start(self) -> int:
        return DAY0_START + (self.days - 1) * 86_400

    @property
    def kickoff_ts(self) -> int:
        return self.kickoff_day_start + KICKOFF_HOUR * 3600

    @property
    def full_day_window(self) -> TimeWindow:
        return TimeWindow(self.kickoff_day_start, self.kickoff_day_start + 86_400)

    @property
    def game_window(self) -> TimeWindow:
        return TimeWindow(self.kickoff_ts - 2 * 3600, self.kickoff_ts + 5 * 3600)

    @property
    def pregame_window(self) -> TimeWindow:
        return TimeWindow(self.kickoff_day_start, self.kickoff_ts - 2 * 3600)

    def stadium_bbox(self, margin_cells: int = 3) -> BoundingBox:
        """Small box around the stadium cell, for locating density peaks."""
        s = self.spec.cellsize
        m = margin_cells * s
        return BoundingBox(
            min_lat=self.stadium.lat - m,
            min_lon=self.stadium.lon - m,
            max_lat=self.stadium.lat + m,
            max_lon=self.stadium.lon + m,
        )

    def baseline(self) -> RasterGrid:
        """Smooth synthetic nighttime population surface, no nodata cells."""
        nrows, ncols = self.spec.shape
        rows = np.arange(nrows)[:, None]
        cols = np.arange(ncols)[None, :]
        cr, cc = nrows / 2.0 + 5.0, ncols / 2.0 - 8.0
        d2 = (rows - cr) ** 2 + (cols - cc) ** 2
        vals = 3.0 + 60.0 * np.exp(-d2 / (2.0 * 10.0**2))
        vals *= BASELINE_TOTAL / vals.sum()
        return RasterGrid(spec=self.spec, values=vals)

    def descriptors(self) -> list[ViewDescriptor]:
        venue_ids = tuple(v.venue_id for v in self.venues)
        common = dict(
            spec=self.spec,
            window=self.full_day_window,
            bin_width=BIN_WIDTH,
            venues=venue_ids,
        )
        return [
            ViewDescriptor(name="gameday-all", **common),
            ViewDescriptor(
                name="gameday-game",
                scenario=ScenarioSpec(name="game-hours", window=self.game_window),
                **common,
            ),
            ViewDescriptor(
                name="gameday-pregame",
                scenario=ScenarioSpec(name="non-game-hours", window=self.pregame_window),
                **common,
            ),
            ViewDescriptor(name="gameday-checkins", source_filter=Source.CHECKIN, **common),
            ViewDescriptor(name="gameday-tweets", source_filter=Source.TWEET, **common),
        ]

    def window_total(self, window: TimeWindow, day: int | None = None) -> int:
        """Fold the manifest counts: events of all venues inside ``window``."""
        total = 0
        for venue, table in self.counts.items():
            for d in range(self.days):
                day_start = DAY0_START + d * 86_400
                if day is not None and d != day:
                    continue
                for b in range(BINS_PER_DAY):
                    lo = day_start + b * BIN_WIDTH
                    if window.contains(lo) and window.contains(lo + BIN_WIDTH - 1):
                        total += int(table[d, b])
        return total

    def manifest(self) -> dict[str, Any]:
        spec = self.spec
        venue_cells = {
            v.venue_id: cell_of(v.lat, v.lon, spec) for v in self.venues
        }
        return {
            "seed": self.seed,
            "days": self.days,
            "day0_start": DAY0_START,
            "kickoff_ts": self.kickoff_ts,
            "bin_width": BIN_WIDTH,
            "bins_per_day": BINS_PER_DAY,
            "cellsize": spec.cellsize,
            "ncols": spec.ncols,
            "nrows": spec.nrows,
            "bbox": spec.bbox.to_record(),
            "windows": {
                "full_day": self.full_day_window.to_record(),
                "game-hours": self.game_window.to_record(),
                "non-game-hours": self.pregame_window.to_record(),
            },
            "stadium": {
                "venue_id": self.stadium.venue_id,
                "lat": self.stadium.lat,
                "lon": self.stadium.lon,
                "cell": list(venue_cells[STADIUM_ID]),
            },
            "stadium_bbox": self.stadium_bbox().to_record(),
            "venues": [
                {
                    "venue_id": v.venue_id,
                    "lat": v.lat,
                    "lon": v.lon,
                    "cell": list(venue_cells[v.venue_id]),
                }
                for v in self.venues
            ],
            "rate_curves": {v: [float(x) for x in c] for v, c in self.rate_curves.items()},
            "counts": {v: t.tolist() for v, t in self.counts.items()},
            "totals": {
                "events": len(self.events),
                "kickoff_day": self.window_total(self.full_day_window),
                "game-hours": self.window_total(self.game_window),
                "non-game-hours": self.window_total(self.pregame_window),
            },
            "attendance": dict(ATTENDANCE),
            "baseline": {"name": BASELINE_NAME, "total": BASELINE_TOTAL},
            "files": {
                "events": EVENTS_FILE,
                "baseline": BASELINE_FILE,
                "views": VIEWS_FILE,
            },
        }


def _place_venues(rng: np.random.Generator, spec: GridSpec) -> tuple[Venue, ...]:
    """Stadium at the center; 95 venues in an annulus clear of its cell."""
    venues = [Venue(venue_id=STADIUM_ID, lat=CENTER_LAT, lon=CENTER_LON)]
    inner = 4 * spec.cellsize * M_PER_DEG_LAT  # keep the stadium's peak clean
    outer = 0.93 * RADIUS_M
    n = 0
    while n < N_VENUES:
        u, theta = rng.random(), rng.random() * 2.0 * math.pi
        r = math.sqrt(u * (outer**2 - inner**2) + inner**2)
        lat = CENTER_LAT + (r * math.sin(theta)) / M_PER_DEG_LAT
        lon = CENTER_LON + (r * math.cos(theta)) / (
            M_PER_DEG_LAT * math.cos(math.radians(CENTER_LAT))
        )
        if cell_of(lat, lon, spec) is None:
            continue
        n += 1
        venues.append(Venue(venue_id=f"venue-{n:02d}", lat=lat, lon=lon))
    return tuple(venues)


def synthesize(seed: int, days: int = DEFAULT_DAYS, with_events: bool = True) -> Gameday:
    """Build the scenario for a seed.

    ``with_events=False`` skips event materialization but produces identical
    geometry, rates, and counts — handy for sampling the count model alone.
    """
    geometry_rng = np.random.default_rng([0, seed])
    counts_rng = np.random.default_rng([1, seed])
    events_rng = np.random.default_rng([2, seed])

    spec = GridSpec(bbox=scenario_bbox(), cellsize=DEFAULT_CELLSIZE)
    venues = _place_venues(geometry_rng, spec)

    bins = np.arange(BINS_PER_DAY, dtype=np.float64)
    rate_curves: dict[str, np.ndarray] = {STADIUM_ID: _stadium_curve(bins)}
    ambient = _ambient_shape(bins)
    for v in venues[1:]:
        scale = geometry_rng.uniform(2.0, 6.0)
        rate_curves[v.venue_id] = scale * ambient

    counts = {
        v.venue_id: counts_rng.poisson(
            lam=np.tile(rate_curves[v.venue_id], (days, 1))
        ).astype(np.int64)
        for v in venues
    }

    events: list[GeoEvent] = []
    if with_events:
        raw: list[tuple[int, str, int, Venue, Source]] = []
        for v in venues:
            table = counts[v.venue_id]
            for d in range(days):
                day_start = DAY0_START + d * 86_400
                for b in range(BINS_PER_DAY):
                    n = int(table[d, b])
                    if n == 0:
                        continue
                    offsets = events_rng.integers(0, BIN_WIDTH, size=n)
                    kinds = events_rng.random(n) < 0.6
                    for i in range(n):
                        ts = day_start + b * BIN_WIDTH + int(offsets[i])
                        src = Source.CHECKIN if kinds[i] else Source.TWEET
                        raw.append((ts, v.venue_id, len(raw), v, src))
        raw.sort(key=lambda t: (t[0], t[1], t[2]))
        events = [
            GeoEvent(
                event_id=f"gd-{i + 1:06d}",
                source=src,
                ts=ts,
                lat=venue.lat,
                lon=venue.lon,
                venue_id=venue.venue_id,
            )
            for i, (ts, _, _, venue, src) in enumerate(raw)
        ]

    return Gameday(
        seed=seed,
        days=days,
        spec=spec,
        stadium=venues[0],
        venues=venues,
        rate_curves=rate_curves,
        counts=counts,
        events=tuple(events),
    )


def write_gameday(gd: Gameday, out_dir: str | Path) -> dict[str, Path]:
    """Write the event file, manifest, baseline raster, and descriptor set."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": out / EVENTS_FILE,
        "manifest": out / MANIFEST_FILE,
        "baseline": out / BASELINE_FILE,
        "views": out / VIEWS_FILE,
    }
    with open(paths["events"], "w", encoding="utf-8") as fp:
        for ev in gd.events:
            fp.write(event_to_json_line(ev))
    with open(paths["manifest"], "w", encoding="utf-8") as fp:
        json.dump(gd.manifest(), fp, indent=2, sort_keys=True)
        fp.write("\n")
    write_asc_path(gd.baseline(), paths["baseline"])
    with open(paths["views"], "w", encoding="utf-8") as fp:
        json.dump(
            {"views": [d.to_record() for d in gd.descriptors()]}, fp, indent=2, sort_keys=True
        )
        fp.write("\n")
    return paths
