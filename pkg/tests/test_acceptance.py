"""Release acceptance gate.

One test per acceptance criterion. Each prints a single verdict line
(written past pytest's capture so it always reaches the terminal):

    [PASS] merge law ...
    [FAIL] merge law ...

The suite needs nothing beyond the installed package: no running service,
no built frontend. The liveness criterion replays in real time and takes
about 100 seconds; everything else finishes in seconds.
"""

import contextlib
import io
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from geopulse import (
    BoundingBox,
    Engine,
    GeoEvent,
    GridSpec,
    RasterGrid,
    Source,
    TimeWindow,
    ViewDescriptor,
    kde,
)
from geopulse import gameday
from geopulse.analytics import ScenarioSpec, occupancy_curve
from geopulse.archive import EventArchive
from geopulse.batch import build_full
from geopulse.formats import (
    asc_dumps,
    event_to_json_line,
    parse_event_line,
    read_asc,
    read_venue_csv,
    venue_csv_dumps,
)
from geopulse.gateway.http import create_app
from geopulse.ingest import ReplaySpec, replay
from geopulse.serving import PublishedView, ServingRegistry, merge
from geopulse.speed import SpeedStore

from .oracles import (
    brute_kde,
    expected_scenario_dims,
    fold_manifest_cells,
    fold_manifest_venue_bins,
)

CS = 1.0 / 1200.0
DAY = 86_400
T0 = 1_383_350_400


@pytest.fixture
def verdict(capfd):
    """Verdict printer that suspends capture so the line always shows."""

    @contextlib.contextmanager
    def _verdict(name):
        try:
            yield
        except BaseException:
            with capfd.disabled():
                print(f"[FAIL] {name}", flush=True)
            raise
        with capfd.disabled():
            print(f"[PASS] {name}", flush=True)

    return _verdict


def grid_spec(nrows, ncols, min_lat=35.0, min_lon=-84.0):
    return GridSpec(
        bbox=BoundingBox(
            min_lat=min_lat,
            min_lon=min_lon,
            max_lat=min_lat + nrows * CS,
            max_lon=min_lon + ncols * CS,
        ),
        cellsize=CS,
    )


class TestMergeLaw:
    """merge(batch(<=k), realtime((k,n])) == batch(<=n), bit-exact."""

    N_STREAMS = 200
    VENUES = ("stadium", "cafe", "quiet-corner")

    def _random_descriptor(self, rng, i):
        kw = dict(
            name=f"stream-{i:03d}",
            spec=grid_spec(8, 8),
            window=TimeWindow(start=T0, end=T0 + DAY),
            bin_width=1800,
            venues=self.VENUES,
        )
        if rng.random() < 0.33:
            kw["source_filter"] = Source(str(rng.choice(["checkin", "tweet", "sensor"])))
        if rng.random() < 0.33:
            lo = T0 + int(rng.integers(0, 20)) * 1800
            hi = lo + int(rng.integers(1, 20)) * 1800
            kw["scenario"] = ScenarioSpec(name="phase", window=TimeWindow(start=lo, end=hi))
        return ViewDescriptor(**kw)

    def _random_events(self, rng, n):
        # mostly admissible, with out-of-window, out-of-grid, and venueless
        # events mixed in so routing is part of what the law covers
        ts = T0 + rng.integers(-900, DAY + 900, size=n)
        lat = 35.0 + rng.uniform(-2 * CS, 10 * CS, size=n)
        lon = -84.0 + rng.uniform(-2 * CS, 10 * CS, size=n)
        sources = rng.choice(["checkin", "tweet", "sensor", "open_data"], size=n)
        venues = rng.choice(list(self.VENUES) + [None], size=n)
        return [
            GeoEvent(
                event_id=f"e{i:06d}",
                ts=int(ts[i]),
                lat=float(lat[i]),
                lon=float(lon[i]),
                source=Source(sources[i]),
                venue_id=venues[i],
            )
            for i in range(n)
        ]

    def test_merge_law(self, tmp_path, verdict):
        with verdict(
            "merge law: 200 randomized streams, any split, raster and venue bins bit-exact, < 60 s"
        ):
            rng = np.random.default_rng(2024)
            sizes = np.concatenate(
                [
                    rng.integers(30, 600, size=150),
                    rng.integers(600, 2000, size=40),
                    rng.integers(3000, 5001, size=10),
                ]
            )
            rng.shuffle(sizes)
            assert len(sizes) == self.N_STREAMS and sizes.max() <= 5000

            t_start = time.monotonic()
            for i, n in enumerate(map(int, sizes)):
                d = self._random_descriptor(rng, i)
                archive = EventArchive(tmp_path / f"s{i:03d}")
                speed = SpeedStore()
                speed.register(d, watermark=0)
                for seq, e in enumerate(self._random_events(rng, n), start=1):
                    archive.append(e)
                    speed.apply(e, seq)

                split = int(rng.integers(0, n + 1))
                batch, venue = build_full(archive, d, up_to=split)
                published = ServingRegistry()
                published.publish(PublishedView(batch=batch, venue=venue))
                if rng.random() < 0.5:
                    speed.compact(d.name, int(rng.integers(0, split + 1)))

                merged = merge(d.name, published, speed)
                full_batch, full_venue = build_full(archive, d, up_to=n)

                assert merged.as_of_seq == n
                assert np.array_equal(merged.counts.values, full_batch.counts.values)
                assert merged.venue_bins == full_venue.bins
                archive.close()
            elapsed = time.monotonic() - t_start
            assert elapsed < 60.0, f"merge-law sweep took {elapsed:.1f}s"


class TestKdeOracle:
    RADIUS = 2

    def test_kde_against_brute_force(self, verdict):
        with verdict(
            "kde: impulse responses match the brute-force oracle to 1e-12, "
            "mass conserved to 1e-9 on 1000 rasters, linear and translation-equivariant"
        ):
            rng = np.random.default_rng(7)

            # impulse responses, every interior cell of an 11x11 grid
            spec = grid_spec(11, 11)
            for r in range(2, 9):
                for c in range(2, 9):
                    values = np.zeros((11, 11))
                    values[r, c] = 1.0
                    out = kde(RasterGrid(spec=spec, values=values), radius=self.RADIUS)
                    expect = brute_kde(values, self.RADIUS)
                    assert np.allclose(out.values, expect, atol=1e-12, rtol=0.0)
                    assert out.values[r, c] == pytest.approx(1.0 / 4.25, abs=1e-12)

            # mass conservation on 1000 random rasters, edge/corner impulses included
            checked = 0
            for k in range(940):
                nr = int(rng.integers(5, 17))
                nc = int(rng.integers(5, 17))
                values = rng.uniform(0.0, 50.0, size=(nr, nc))
                if k % 3 == 0:
                    values[rng.random(size=(nr, nc)) < 0.7] = 0.0
                total_in = values.sum()
                out = kde(RasterGrid(spec=grid_spec(nr, nc), values=values), radius=self.RADIUS)
                assert abs(out.values.sum() - total_in) <= 1e-9 * max(1.0, total_in)
                checked += 1
            for r in (0, 1, 4, 5):
                for c in (0, 1, 4, 5):
                    values = np.zeros((6, 6))
                    values[r, c] = 3.5
                    out = kde(RasterGrid(spec=grid_spec(6, 6), values=values), radius=self.RADIUS)
                    assert abs(out.values.sum() - 3.5) <= 1e-9 * 3.5
                    checked += 1
            for k in range(60 - 16):
                values = np.zeros((7, 7))
                values[int(rng.integers(0, 7)), int(rng.integers(0, 7))] = float(rng.uniform(0.5, 9))
                out = kde(RasterGrid(spec=grid_spec(7, 7), values=values), radius=self.RADIUS)
                assert abs(out.values.sum() - values.sum()) <= 1e-9 * max(1.0, values.sum())
                checked += 1
            assert checked == 1000

            # linearity: kde(aR1 + bR2) == a kde(R1) + b kde(R2)
            spec99 = grid_spec(9, 9)
            for _ in range(50):
                r1 = rng.uniform(0, 10, size=(9, 9))
                r2 = rng.uniform(0, 10, size=(9, 9))
                a, b = rng.uniform(0.1, 5, size=2)
                lhs = kde(RasterGrid(spec=spec99, values=a * r1 + b * r2), radius=self.RADIUS)
                rhs = a * kde(RasterGrid(spec=spec99, values=r1), radius=self.RADIUS).values + (
                    b * kde(RasterGrid(spec=spec99, values=r2), radius=self.RADIUS).values
                )
                assert np.allclose(lhs.values, rhs, atol=1e-9, rtol=0.0)

            # translation equivariance in the interior
            base = np.zeros((12, 12))
            base[4, 5] = 2.0
            shifted = np.zeros((12, 12))
            shifted[5, 6] = 2.0
            out_a = kde(RasterGrid(spec=grid_spec(12, 12), values=base), radius=self.RADIUS)
            out_b = kde(RasterGrid(spec=grid_spec(12, 12), values=shifted), radius=self.RADIUS)
            assert np.allclose(out_a.values[2:7, 3:8], out_b.values[3:8, 4:9], atol=1e-9, rtol=0.0)


class TestRasterizationConservation:
    def test_counts_equal_manifest_fold(self, tmp_path, verdict):
        with verdict(
            "rasterization: batch per-cell counts equal the scenario-manifest fold exactly; "
            "grid dimensions match the meters-per-degree oracle within one cell"
        ):
            gd = gameday.synthesize(7, days=8)
            manifest = gd.manifest()

            archive = EventArchive(tmp_path)
            for e in gd.events:
                archive.append(e)

            # the bundled kickoff-day view
            d_all = next(d for d in gd.descriptors() if d.name == "gameday-all")
            batch, _ = build_full(archive, d_all, up_to=len(gd.events))
            fold = fold_manifest_cells(manifest, d_all.window.to_record())
            expect = np.zeros(gd.spec.shape)
            for (r, c), n in fold.items():
                expect[r, c] = n
            assert np.array_equal(batch.counts.values, expect)
            assert batch.counts.values.sum() == manifest["totals"]["kickoff_day"]

            # a wider view spanning every archived day
            d_span = ViewDescriptor(
                name="all-days",
                spec=gd.spec,
                window=TimeWindow(start=gameday.DAY0_START, end=gameday.DAY0_START + 8 * DAY),
                bin_width=1800,
                venues=tuple(v.venue_id for v in gd.venues),
            )
            batch_span, venue_span = build_full(archive, d_span, up_to=len(gd.events))
            fold_span = fold_manifest_cells(manifest, d_span.window.to_record())
            expect_span = np.zeros(gd.spec.shape)
            for (r, c), n in fold_span.items():
                expect_span[r, c] = n
            assert np.array_equal(batch_span.counts.values, expect_span)
            assert batch_span.counts.values.sum() == len(gd.events)
            rows = {v: list(b) for v, b in venue_span.bins.items()}
            assert rows == fold_manifest_venue_bins(manifest, d_span.window.to_record())
            archive.close()

            dims = expected_scenario_dims()
            assert abs(gd.spec.ncols - dims[0]) <= 1
            assert abs(gd.spec.nrows - dims[1]) <= 1


class TestScenarioPipeline:
    def test_two_scenario_final_grids(self, tmp_path, verdict):
        with verdict(
            "scenario pipeline: final totals equal baseline + attendance to 1e-9 relative; "
            "game-hours density peak falls inside the stadium box"
        ):
            gd = gameday.synthesize(7, days=8)
            manifest = gd.manifest()
            baseline = gd.baseline()

            with Engine(tmp_path) as engine:
                for d in gd.descriptors():
                    if d.name in ("gameday-game", "gameday-pregame"):
                        engine.register_view(d)
                engine.archive.register_reference(gameday.BASELINE_NAME, baseline, {})
                for e in gd.events:
                    engine.ingest(e)
                engine.rebuild_all()

                scenario_views = {
                    "game-hours": "gameday-game",
                    "non-game-hours": "gameday-pregame",
                }
                for scenario, view_name in scenario_views.items():
                    attendance = manifest["attendance"][scenario]
                    final = engine.layer_raster(
                        view_name,
                        layer="final",
                        radius=2,
                        population=attendance,
                        baseline=gameday.BASELINE_NAME,
                    )
                    expect_total = gameday.BASELINE_TOTAL + attendance
                    assert final.values.sum() == pytest.approx(expect_total, rel=1e-9)

                    if scenario == "game-hours":
                        diff = final.values - baseline.values
                        r, c = np.unravel_index(int(np.argmax(diff)), diff.shape)
                        lat, lon = gd.spec.cell_center(int(r), int(c))
                        box = BoundingBox.from_record(manifest["stadium_bbox"])
                        assert box.contains(lat, lon)


class TestOccupancy:
    SEEDS = range(20)

    def test_occupancy_curves(self, verdict):
        with verdict(
            "occupancy: 0 <= ci_low <= estimate <= ci_high <= 1 with peak 1 on every curve; "
            "identical days give zero band width; bands cover the true rate curve in >= 90% of bins"
        ):
            covered = total = 0
            for seed in self.SEEDS:
                gd = gameday.synthesize(seed, days=8, with_events=False)
                true = np.asarray(gd.rate_curves[gameday.STADIUM_ID], dtype=float)
                true /= true.max()
                curve = occupancy_curve(
                    [list(map(int, row)) for row in gd.counts[gameday.STADIUM_ID]],
                    venue_id=gameday.STADIUM_ID,
                    bin_width=gameday.BIN_WIDTH,
                    confidence=0.95,
                    resamples=1000,
                    seed=seed,
                )
                est = np.asarray(curve.estimate)
                lo = np.asarray(curve.ci_low)
                hi = np.asarray(curve.ci_high)
                assert np.all(0.0 <= lo) and np.all(lo <= est)
                assert np.all(est <= hi) and np.all(hi <= 1.0)
                assert est.max() == pytest.approx(1.0, abs=1e-12)
                hit = (lo <= true) & (true <= hi)
                covered += int(hit.sum())
                total += hit.size
            coverage = covered / total
            assert coverage >= 0.90, f"band coverage {coverage:.3f}"

            one_day = [0, 4, 9, 18, 9, 4, 0, 0]
            curve = occupancy_curve(
                [one_day] * 6, venue_id="steady", bin_width=10_800, seed=1
            )
            assert curve.ci_low == curve.estimate == curve.ci_high


class TestDurabilityAndFormats:
    def _event(self, i, rng):
        return GeoEvent(
            event_id=f"e{i:06d}",
            ts=T0 + i,
            lat=35.0 + float(rng.uniform(0, 8 * CS)),
            lon=-84.0 + float(rng.uniform(0, 8 * CS)),
            source=Source(str(rng.choice(["checkin", "tweet", "sensor", "open_data"]))),
            venue_id=str(rng.choice(["stadium", "cafe"])) if rng.random() < 0.5 else None,
            attributes={"k": str(int(rng.integers(0, 9)))} if rng.random() < 0.3 else {},
        )

    def test_recovery_and_round_trips(self, tmp_path, verdict):
        with verdict(
            "durability: torn-tail crash recovery keeps the sequence dense; "
            "asc, csv, and ndjson round trips are lossless at declared precision"
        ):
            rng = np.random.default_rng(13)

            # crash mid-write of record 500, then recover and keep appending
            archive = EventArchive(tmp_path / "arch")
            events = [self._event(i, rng) for i in range(500)]
            for e in events[:499]:
                archive.append(e)
            archive.close()
            segment = sorted((tmp_path / "arch" / "archive").glob("segment-*.ndjson"))[-1]
            with open(segment, "ab") as fp:
                fp.write(b'{"event_id": "e000499", "ts": 1383350899, "la')

            archive = EventArchive(tmp_path / "arch")
            assert archive.high_watermark() == 499
            seqs = [s.seq for s in archive.scan()]
            assert seqs == list(range(1, 500))
            archive.append(events[499])
            extra = [self._event(i, rng) for i in range(500, 600)]
            for e in extra:
                archive.append(e)
            archive.close()

            archive = EventArchive(tmp_path / "arch")
            seqs = [s.seq for s in archive.scan()]
            assert seqs == list(range(1, 601))
            stored = [s.event for s in archive.scan()]
            assert stored == events + extra
            archive.close()

            # asc: writing what was read back reproduces the text, and
            # short-decimal values survive exactly
            for _ in range(25):
                nr, nc = int(rng.integers(2, 9)), int(rng.integers(2, 9))
                values = np.round(rng.uniform(-1000, 1000, size=(nr, nc)), 4)
                values[rng.random(size=(nr, nc)) < 0.1] = -9999.0
                raster = RasterGrid(spec=grid_spec(nr, nc), values=values)
                text = asc_dumps(raster)
                back = read_asc(io.StringIO(text))
                assert asc_dumps(back) == text
                assert np.array_equal(back.values, values)
                assert back.nodata == raster.nodata

            # csv: integer venue bins round trip exactly
            bins = {
                "stadium": [int(x) for x in rng.integers(0, 1000, size=48)],
                "cafe": [int(x) for x in rng.integers(0, 10, size=48)],
            }
            text = venue_csv_dumps(bins, T0, 1800)
            back, start, width = read_venue_csv(io.StringIO(text))
            assert (back, start, width) == (bins, T0, 1800)

            # ndjson: full event record round trip, field for field
            for i in range(200):
                e = self._event(i, rng)
                assert parse_event_line(event_to_json_line(e)) == e


class TestLiveness:
    RATE = 1000
    SECONDS = 100

    def test_streaming_queries_stay_consistent(self, tmp_path, verdict):
        with verdict(
            "liveness: 1000 events/s for 100 s; query totals never decrease, never exceed "
            "ingested events, and finish equal to the accepted count"
        ):
            spec = grid_spec(10, 10)
            descriptor = ViewDescriptor(
                name="live",
                spec=spec,
                window=TimeWindow(start=T0, end=T0 + DAY),
                bin_width=1800,
                venues=("stadium",),
            )
            rng = np.random.default_rng(99)
            n = self.RATE * self.SECONDS
            lines = []
            for i in range(n):
                e = GeoEvent(
                    event_id=f"live-{i:06d}",
                    ts=T0 + i // self.RATE,
                    lat=35.0 + float(rng.uniform(0, 10 * CS)),
                    lon=-84.0 + float(rng.uniform(0, 10 * CS)),
                    source=Source.CHECKIN,
                    venue_id="stadium" if i % 3 == 0 else None,
                )
                lines.append(event_to_json_line(e))
            feed = tmp_path / "feed.ndjson"
            feed.write_text("".join(lines), encoding="utf-8")

            engine = Engine(tmp_path / "data", recompute_interval=3.0)
            engine.register_view(descriptor)
            engine.start_recompute_loop()
            accepted = 0
            report = {}

            def on_event(event, seq):
                nonlocal accepted
                accepted += 1

            def run_replay():
                report["result"] = replay(
                    ReplaySpec(path=feed, speed_factor=1.0), engine.ingest, on_event=on_event
                )

            observations = []
            with TestClient(create_app(engine)) as client:
                worker = threading.Thread(target=run_replay)
                t_start = time.monotonic()
                worker.start()
                while worker.is_alive():
                    before = engine.archive.high_watermark()
                    resp = client.post("/query", json={"view": "live", "aggregate": "total"})
                    after = engine.archive.high_watermark()
                    assert resp.status_code == 200
                    observations.append((before, resp.json()["value"], after))
                    time.sleep(0.5)
                worker.join()
                elapsed = time.monotonic() - t_start
                final = client.post(
                    "/query", json={"view": "live", "aggregate": "total"}
                ).json()["value"]
            engine.close()

            assert report["result"].accepted == n
            assert report["result"].rejected == 0
            assert accepted == n
            # paced replay: one second of stream time per wall second
            assert self.SECONDS - 5 <= elapsed <= self.SECONDS + 30, f"elapsed {elapsed:.1f}s"
            assert len(observations) >= 100

            totals = [obs[1] for obs in observations]
            assert all(a <= b for a, b in zip(totals, totals[1:])), "totals regressed"
            for before, total, after in observations:
                assert before <= total <= after, (before, total, after)
            assert final == n
