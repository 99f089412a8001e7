"""Batch rebuilds: pure functions of the archive prefix."""

import numpy as np
import pytest

from geopulse import (
    BinMismatch,
    BoundingBox,
    EventArchive,
    GeoEvent,
    GridSpec,
    InvalidArgument,
    ScenarioSpec,
    Source,
    TimeWindow,
    ViewDescriptor,
    build_batch_view,
    build_venue_view,
)
from geopulse.batch import build_full

CS = 1.0 / 1200.0
DAY = 86_400
T0 = 1_383_350_400


def spec():
    return GridSpec(
        bbox=BoundingBox(
            min_lat=35.0, min_lon=-84.0, max_lat=35.0 + 10 * CS, max_lon=-84.0 + 10 * CS
        ),
        cellsize=CS,
    )


def desc(**kw):
    base = dict(name="v", spec=spec(), window=TimeWindow(start=T0, end=T0 + DAY))
    base.update(kw)
    return ViewDescriptor(**base)


def make_events(n, seed=0):
    rng = np.random.default_rng(seed)
    events = []
    for i in range(n):
        events.append(
            GeoEvent(
                event_id=f"e{i:05d}",
                ts=int(rng.integers(T0 - 1000, T0 + DAY + 1000)),
                lat=float(rng.uniform(34.999, 35.01)),
                lon=float(rng.uniform(-84.001, -83.99)),
                source=Source.CHECKIN if i % 3 else Source.TWEET,
                venue_id=f"venue-{i % 4}" if i % 2 else None,
            )
        )
    return events


@pytest.fixture
def archive(tmp_path):
    a = EventArchive(tmp_path)
    for e in make_events(400):
        a.append(e)
    yield a
    a.close()


class TestBatchView:
    def test_counts_match_brute_force(self, archive):
        d = desc()
        view = build_batch_view(archive, d)
        assert view.watermark == 400
        expected = np.zeros(d.spec.shape)
        for entry in archive.scan():
            cell = d.route_cell(entry.event)
            if cell is not None:
                expected[cell] += 1
        assert np.array_equal(view.counts.values, expected)

    def test_deterministic_rebuilds(self, archive):
        d = desc()
        a = build_batch_view(archive, d)
        b = build_batch_view(archive, d)
        assert a.same_result(b)
        assert np.array_equal(a.counts.values, b.counts.values)

    def test_prefix_watermark(self, archive):
        d = desc()
        half = build_batch_view(archive, d, up_to=200)
        assert half.watermark == 200
        full = build_batch_view(archive, d)
        assert half.counts.values.sum() <= full.counts.values.sum()
        # a view built later over the same prefix is identical
        again = build_batch_view(archive, d, up_to=200)
        assert half.same_result(again)

    def test_source_filter(self, archive):
        tweets = build_batch_view(archive, desc(source_filter=Source.TWEET))
        checkins = build_batch_view(archive, desc(source_filter=Source.CHECKIN))
        everything = build_batch_view(archive, desc())
        assert (
            tweets.counts.values.sum() + checkins.counts.values.sum()
            == everything.counts.values.sum()
        )

    def test_scenario_narrows_window(self, archive):
        sc = ScenarioSpec("slice", TimeWindow(start=T0 + 3600, end=T0 + 7200))
        narrowed = build_batch_view(archive, desc(scenario=sc))
        wide = build_batch_view(archive, desc())
        assert narrowed.counts.values.sum() <= wide.counts.values.sum()
        expected = sum(
            1
            for entry in archive.scan()
            if T0 + 3600 <= entry.event.ts < T0 + 7200
            and desc().route_cell(entry.event) is not None
        )
        assert narrowed.counts.values.sum() == expected

    def test_up_to_bounds(self, archive):
        with pytest.raises(InvalidArgument):
            build_batch_view(archive, desc(), up_to=401)
        with pytest.raises(InvalidArgument):
            build_batch_view(archive, desc(), up_to=-1)

    def test_empty_archive(self, tmp_path):
        a = EventArchive(tmp_path / "fresh")
        view = build_batch_view(a, desc())
        assert view.watermark == 0
        assert view.counts.values.sum() == 0
        a.close()


class TestVenueView:
    def test_bins_match_brute_force(self, archive):
        d = desc(venues=("venue-0", "venue-9"))
        view = build_venue_view(archive, d)
        assert view.bin_width == 1800
        expected: dict[str, list[int]] = {"venue-0": [0] * 48, "venue-9": [0] * 48}
        for entry in archive.scan():
            e = entry.event
            if e.venue_id is None or not (T0 <= e.ts < T0 + DAY):
                continue
            expected.setdefault(e.venue_id, [0] * 48)[(e.ts - T0) // 1800] += 1
        assert {v: list(b) for v, b in view.bins.items()} == expected

    def test_declared_venues_always_present(self, archive):
        view = build_venue_view(archive, desc(venues=("ghost",)))
        assert view.bins["ghost"] == (0,) * 48
        assert view.venue_total("ghost") == 0

    def test_width_override_must_tile(self, archive):
        build_venue_view(archive, desc(), bin_width=3600)  # fine: 24 bins
        with pytest.raises(BinMismatch):
            build_venue_view(archive, desc(), bin_width=7000)

    def test_wider_bins_aggregate_narrow_ones(self, archive):
        d = desc()
        narrow = build_venue_view(archive, d, bin_width=1800)
        wide = build_venue_view(archive, d, bin_width=3600)
        for venue, bins in narrow.bins.items():
            merged = [bins[i] + bins[i + 1] for i in range(0, 48, 2)]
            assert list(wide.bins[venue]) == merged


class TestBuildFull:
    def test_consistent_with_separate_builders(self, archive):
        d = desc(venues=("venue-1",))
        batch, venue = build_full(archive, d)
        assert batch.watermark == venue.watermark == 400
        assert batch.same_result(build_batch_view(archive, d))
        separate = build_venue_view(archive, d)
        assert dict(venue.bins) == dict(separate.bins)

    def test_single_watermark(self, archive):
        batch, venue = build_full(archive, desc(), up_to=123)
        assert batch.watermark == venue.watermark == 123
