"""End-to-end engine behavior: dual dispatch, rebuild cycles, recovery."""

import io
import threading

import numpy as np
import pytest

from geopulse import (
    BinMismatch,
    BoundingBox,
    DuplicateEvent,
    Engine,
    GeoEvent,
    GridSpec,
    InvalidArgument,
    NoObservations,
    QueryRequest,
    RasterGrid,
    Source,
    TimeWindow,
    UnknownView,
    ViewDescriptor,
)
from geopulse.batch import build_full
from geopulse.formats import asc_dumps, read_asc

CS = 1.0 / 1200.0
DAY = 86_400
T0 = 1_383_350_400
NROWS = NCOLS = 10


def spec():
    return GridSpec(
        bbox=BoundingBox(
            min_lat=35.0, min_lon=-84.0, max_lat=35.0 + NROWS * CS, max_lon=-84.0 + NCOLS * CS
        ),
        cellsize=CS,
    )


def desc(name="main", **kw):
    base = dict(
        name=name,
        spec=spec(),
        window=TimeWindow(start=T0, end=T0 + 2 * DAY),
        venues=("stadium",),
    )
    base.update(kw)
    return ViewDescriptor(**base)


def ev(i, ts=None, row=0, col=0, venue_id=None, source=Source.CHECKIN):
    return GeoEvent(
        event_id=f"e{i:06d}",
        ts=ts if ts is not None else T0 + i,
        lat=35.0 + (NROWS - 1 - row + 0.5) * CS,
        lon=-84.0 + (col + 0.5) * CS,
        source=source,
        venue_id=venue_id,
    )


@pytest.fixture
def engine(tmp_path):
    e = Engine(tmp_path)
    e.register_view(desc())
    yield e
    e.close()


class TestIngest:
    def test_event_visible_immediately(self, engine):
        engine.ingest(ev(1, row=2, col=3))
        m = engine.merged("main")
        assert m.counts.values[2, 3] == 1.0
        assert m.as_of_seq == 1

    def test_duplicate_rejected_nowhere_applied(self, engine):
        engine.ingest(ev(1))
        with pytest.raises(DuplicateEvent):
            engine.ingest(ev(1))
        assert engine.merged("main").total() == 1.0
        assert engine.archive.high_watermark() == 1

    def test_ingest_record_validates(self, engine):
        seq = engine.ingest_record(
            {
                "event_id": "r1",
                "ts": T0 + 5,
                "lat": 35.0 + 0.5 * CS,
                "lon": -84.0 + 0.5 * CS,
                "source": "tweet",
            }
        )
        assert seq == 1

    def test_concurrent_ingest_lands_exactly_once(self, tmp_path):
        e = Engine(tmp_path)
        e.register_view(desc())
        errors = []

        def worker(base):
            try:
                for i in range(100):
                    e.ingest(ev(base * 1000 + i, ts=T0 + (base * 1000 + i) % DAY, row=base, col=i % NCOLS))
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(t,)) for t in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert e.archive.high_watermark() == 400
        m = e.merged("main")
        assert m.total() == 400.0
        assert m.as_of_seq == 400
        e.close()


class TestRebuild:
    def test_rebuild_preserves_merged_result(self, engine):
        for i in range(1, 60):
            engine.ingest(ev(i, row=i % NROWS, col=i % NCOLS, venue_id=f"v{i % 3}"))
        before = engine.merged("main")
        mark = engine.rebuild_view("main")
        after = engine.merged("main")
        assert mark == 59
        assert np.array_equal(before.counts.values, after.counts.values)
        got = {v: b for v, b in after.venue_bins.items() if any(b)}
        want = {v: b for v, b in before.venue_bins.items() if any(b)}
        assert got == want
        assert after.watermark == 59

    def test_interleaved_ingest_and_rebuild(self, engine):
        for i in range(1, 30):
            engine.ingest(ev(i, col=1))
        engine.rebuild_view("main")
        for i in range(30, 50):
            engine.ingest(ev(i, col=2))
        m = engine.merged("main")
        batch_view, _ = build_full(engine.archive, engine.registry.get("main"))
        assert np.array_equal(m.counts.values, batch_view.counts.values)
        assert m.watermark == 29
        assert m.as_of_seq == 49

    def test_rebuild_all(self, engine):
        engine.register_view(desc(name="second"))
        for i in range(1, 10):
            engine.ingest(ev(i))
        marks = engine.rebuild_all()
        assert marks == {"main": 9, "second": 9}

    def test_recompute_loop_runs(self, tmp_path):
        e = Engine(tmp_path, recompute_interval=0.05)
        e.register_view(desc())
        for i in range(1, 20):
            e.ingest(ev(i))
        e.start_recompute_loop()
        try:
            deadline = threading.Event()
            for _ in range(100):
                if e.published.watermark("main") == 19:
                    break
                deadline.wait(0.05)
            assert e.published.watermark("main") == 19
            assert e.merged("main").total() == 19.0
        finally:
            e.close()

    def test_views_status(self, engine):
        for i in range(1, 5):
            engine.ingest(ev(i))
        engine.rebuild_view("main")
        status = engine.views_status()
        assert len(status) == 1
        assert status[0]["name"] == "main"
        assert status[0]["watermark"] == 4
        assert status[0]["realtime_ceiling"] == 4


class TestViewLifecycle:
    def test_register_on_nonempty_archive(self, engine):
        for i in range(1, 15):
            engine.ingest(ev(i, row=3, col=3))
        wm = engine.register_view(desc(name="late"))
        assert wm == 14
        # already-archived events are in the batch half
        assert engine.merged("late").counts.values[3, 3] == 14.0
        # and new ones flow through the realtime half
        engine.ingest(ev(99, row=3, col=3))
        assert engine.merged("late").counts.values[3, 3] == 15.0

    def test_unknown_view_query(self, engine):
        with pytest.raises(UnknownView):
            engine.merged("ghost")

    def test_query_round_trip(self, engine):
        for i in range(1, 6):
            engine.ingest(ev(i, row=1, col=1))
        res = engine.query(QueryRequest(view="main", aggregate="total"))
        assert res.value == 5.0
        rec = engine.query_record({"view": "main", "aggregate": "top_k_cells", "k": 1})
        assert rec.cells[0] == {"row": 1, "col": 1, "count": 5.0}


class TestCrashRecovery:
    def test_reopen_preserves_views_and_counts(self, tmp_path):
        e = Engine(tmp_path)
        e.register_view(desc())
        for i in range(1, 40):
            e.ingest(ev(i, row=i % NROWS, col=0, venue_id="stadium"))
        total_before = e.merged("main").total()
        e.close()  # no explicit rebuild: batch watermark is still 0

        again = Engine(tmp_path)
        m = again.merged("main")
        assert m.total() == total_before
        assert m.watermark == 39  # activation rebuilt up to the recovered log
        assert again.registry.get("main") == desc()
        again.close()

    def test_reopen_after_torn_tail(self, tmp_path):
        e = Engine(tmp_path)
        e.register_view(desc())
        for i in range(1, 10):
            e.ingest(ev(i, col=4))
        e.close()
        seg = tmp_path / "archive" / "segment-1.ndjson"
        with open(seg, "a", encoding="utf-8") as fp:
            fp.write('{"seq": 10, "event_id": "torn"')  # mid-write crash

        again = Engine(tmp_path)
        assert again.archive.high_watermark() == 9
        assert again.merged("main").total() == 9.0
        again.ingest(ev(500))
        assert again.archive.high_watermark() == 10
        again.close()


class TestLayers:
    def test_kde_layer_conserves_mass(self, engine):
        for i in range(1, 30):
            engine.ingest(ev(i, row=i % NROWS, col=(i * 3) % NCOLS))
        raw = engine.layer_raster("main", "raw")
        smooth = engine.layer_raster("main", "kde")
        assert smooth.values.sum() == pytest.approx(raw.values.sum(), rel=1e-9)

    def test_final_layer(self, engine):
        base = engine.layer_raster("main", "raw").with_values(np.full((NROWS, NCOLS), 2.0))
        engine.archive.register_reference("ambient", base)
        for i in range(1, 11):
            engine.ingest(ev(i, row=5, col=5))
        final = engine.layer_raster("main", "final", population=300.0, baseline="ambient")
        assert final.values.sum() == pytest.approx(2.0 * NROWS * NCOLS + 300.0, rel=1e-9)

    def test_final_layer_requires_params(self, engine):
        with pytest.raises(InvalidArgument):
            engine.layer_raster("main", "final")
        with pytest.raises(InvalidArgument):
            engine.layer_raster("main", "final", population=10.0)
        with pytest.raises(InvalidArgument):
            engine.layer_raster("main", "nonsense")

    def test_final_layer_with_asc_round_tripped_baseline(self, tmp_path):
        # A view bbox whose span is not a cell multiple loses its north/east
        # edge to snapping when the baseline goes to disk and back; the final
        # layer must still accept it.
        ragged = ViewDescriptor(
            name="ragged",
            spec=GridSpec(
                bbox=BoundingBox(
                    min_lat=35.0,
                    min_lon=-84.0,
                    max_lat=35.0 + (NROWS - 0.4) * CS,
                    max_lon=-84.0 + (NCOLS - 0.6) * CS,
                ),
                cellsize=CS,
            ),
            window=TimeWindow(start=T0, end=T0 + 2 * DAY),
            venues=("stadium",),
        )
        assert ragged.spec.shape == (NROWS, NCOLS)
        e = Engine(tmp_path)
        try:
            e.register_view(ragged)
            base = RasterGrid(spec=ragged.spec, values=np.full((NROWS, NCOLS), 2.0))
            round_tripped = read_asc(io.StringIO(asc_dumps(base)))
            assert round_tripped.spec != base.spec
            e.archive.register_reference("ambient", round_tripped)
            for i in range(1, 11):
                e.ingest(ev(i, row=5, col=5))
            final = e.layer_raster("ragged", "final", population=300.0, baseline="ambient")
            assert final.values.sum() == pytest.approx(2.0 * NROWS * NCOLS + 300.0, rel=1e-9)
        finally:
            e.close()

    def test_admitted_events(self, engine):
        engine.ingest(ev(1, ts=T0 + 5))
        engine.ingest(ev(2, ts=T0 + 2 * DAY + 5))  # outside the view window
        far_away = GeoEvent(
            event_id="e000003", ts=T0 + 50, lat=50.0, lon=10.0, source=Source.CHECKIN
        )
        engine.ingest(far_away)  # outside the grid but admitted
        events = engine.admitted_events("main")
        assert [e.event_id for e in events] == ["e000001", "e000003"]


class TestOccupancy:
    def seed_days(self, engine, venue="stadium", days=4):
        n = 0
        for d in range(days):
            for b, count in enumerate([1, 3, 2]):
                for k in range(count):
                    n += 1
                    engine.ingest(
                        ev(
                            10_000 + n,
                            ts=T0 + d * DAY + b * 1800 + k,
                            venue_id=venue,
                        )
                    )

    def test_curve_end_to_end(self, engine):
        self.seed_days(engine)
        curve = engine.occupancy("stadium", seed=3)
        assert curve.n_days == 4
        assert max(curve.estimate) == 1.0
        assert curve.estimate.index(1.0) == 1  # bin 1 is always the peak
        assert all(lo <= est <= hi for lo, est, hi in zip(curve.ci_low, curve.estimate, curve.ci_high))

    def test_no_observations(self, engine):
        with pytest.raises(NoObservations):
            engine.occupancy("nobody")

    def test_bin_width_must_tile_day(self, engine):
        self.seed_days(engine, days=1)
        with pytest.raises(BinMismatch):
            engine.occupancy("stadium", bin_width=7000)

    def test_deterministic(self, engine):
        self.seed_days(engine)
        a = engine.occupancy("stadium", seed=9)
        b = engine.occupancy("stadium", seed=9)
        assert a == b
