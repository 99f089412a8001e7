"""Wire formats: ASCII grid, NDJSON events, CSV tables, and their round trips."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geopulse import (
    BoundingBox,
    GeoEvent,
    GridSpec,
    InvalidArgument,
    RasterGrid,
    Source,
    SpecMismatch,
    ValidationError,
    occupancy_curve,
)
from geopulse.formats import (
    asc_dumps,
    event_to_json_line,
    occupancy_csv_dumps,
    parse_event_line,
    raster_close,
    read_asc,
    read_asc_path,
    read_events_ndjson,
    read_occupancy_csv,
    read_venue_csv,
    venue_csv_dumps,
    write_asc_path,
    write_events_ndjson,
)


def raster(nrows, ncols, values, cellsize=0.5, nodata=-9999.0):
    spec = GridSpec(
        bbox=BoundingBox(
            min_lat=35.0,
            min_lon=-84.0,
            max_lat=35.0 + nrows * cellsize,
            max_lon=-84.0 + ncols * cellsize,
        ),
        cellsize=cellsize,
    )
    return RasterGrid(spec=spec, values=np.asarray(values, dtype=np.float64), nodata=nodata)


class TestAscGrid:
    def test_two_by_two_layout(self):
        r = raster(2, 2, [[1.0, 2.0], [3.0, 4.0]])
        lines = asc_dumps(r).splitlines()
        assert lines[0] == "NCOLS 2"
        assert lines[1] == "NROWS 2"
        assert lines[2].startswith("XLLCORNER ")
        assert lines[3].startswith("YLLCORNER ")
        assert lines[4].startswith("CELLSIZE ")
        assert lines[5] == "NODATA_VALUE -9999"
        # data rows are north-first, matching the in-memory row order
        assert lines[6] == "1 2"
        assert lines[7] == "3 4"
        assert len(lines) == 8

    def test_round_trip_exact_for_short_values(self):
        r = raster(3, 4, np.arange(12, dtype=np.float64).reshape(3, 4))
        back = read_asc(io.StringIO(asc_dumps(r)))
        assert back.spec == r.spec
        assert np.array_equal(back.values, r.values)
        assert back.nodata == r.nodata

    def test_round_trip_ten_significant_digits(self):
        rng = np.random.default_rng(1)
        vals = rng.uniform(0.0, 1e6, size=(5, 7))
        r = raster(5, 7, vals, cellsize=1.0 / 1200.0)
        back = read_asc(io.StringIO(asc_dumps(r)))
        assert back.spec == r.spec
        np.testing.assert_allclose(back.values, r.values, rtol=1e-9)
        assert raster_close(back, r, rel=1e-9)

    def test_nodata_survives(self):
        vals = [[1.0, -9999.0], [-9999.0, 2.5]]
        back = read_asc(io.StringIO(asc_dumps(raster(2, 2, vals))))
        assert np.array_equal(back.data_mask, [[True, False], [False, True]])

    def test_file_round_trip(self, tmp_path):
        r = raster(2, 3, [[0.5, 1.5, 2.5], [3.5, 4.5, 5.5]], cellsize=1.0 / 1200.0)
        p = tmp_path / "grid.asc"
        write_asc_path(r, p)
        assert raster_close(read_asc_path(p), r)

    def test_missing_header(self):
        with pytest.raises(InvalidArgument):
            read_asc(io.StringIO("NCOLS 2\nNROWS 2\n1 2\n3 4\n"))

    def test_tampered_dims_rejected(self):
        text = asc_dumps(raster(2, 2, [[1, 2], [3, 4]]))
        broken = text.replace("NCOLS 2", "NCOLS 3", 1)
        with pytest.raises(InvalidArgument):
            read_asc(io.StringIO(broken))

    def test_bad_cell_value(self):
        text = asc_dumps(raster(2, 2, [[1, 2], [3, 4]])).replace(" 2", " two", 1)
        with pytest.raises(InvalidArgument):
            read_asc(io.StringIO(text))

    def test_wrong_row_count(self):
        text = asc_dumps(raster(2, 2, [[1, 2], [3, 4]]))
        with pytest.raises(InvalidArgument):
            read_asc(io.StringIO(text + "5 6\n"))

    @given(st.lists(st.floats(min_value=-1e8, max_value=1e8, allow_nan=False), min_size=6, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_round_trip_property(self, flat):
        r = raster(2, 3, np.array(flat).reshape(2, 3))
        back = read_asc(io.StringIO(asc_dumps(r)))
        # %.10g keeps ten significant digits
        np.testing.assert_allclose(back.values, r.values, rtol=1e-9, atol=1e-9)


class TestNdjson:
    def ev(self, i, **kw):
        base = dict(
            event_id=f"e{i}",
            ts=1_383_350_400 + i,
            lat=35.95,
            lon=-83.92,
            source=Source.CHECKIN,
        )
        base.update(kw)
        return GeoEvent(**base)

    def test_line_is_compact_single_line_json(self):
        line = event_to_json_line(self.ev(0, venue_id="v1"))
        assert line.endswith("\n")
        assert line.rstrip("\n").count("\n") == 0
        assert ": " not in line and ", " not in line
        assert '"venue_id":"v1"' in line

    def test_round_trip(self):
        events = [
            self.ev(0),
            self.ev(1, source=Source.TWEET, venue_id="stadium"),
            self.ev(2, source=Source.SENSOR, attributes={"k": "3"}),
        ]
        buf = io.StringIO()
        n = write_events_ndjson(events, buf)
        assert n == 3
        buf.seek(0)
        back = list(read_events_ndjson(buf))
        assert back == events

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValidationError):
            parse_event_line("not json")
        with pytest.raises(ValidationError):
            parse_event_line('{"event_id": "x"}')

    def test_blank_lines_skipped(self):
        events = [self.ev(0), self.ev(1)]
        buf = io.StringIO()
        write_events_ndjson(events, buf)
        text = "\n" + buf.getvalue().replace("\n", "\n\n")
        assert list(read_events_ndjson(io.StringIO(text))) == events

    def test_unknown_keys_ignored(self):
        line = event_to_json_line(self.ev(5)).rstrip("\n")
        patched = line[:-1] + ',"extra_field":true}'
        assert parse_event_line(patched) == self.ev(5)


class TestVenueCsv:
    def test_long_form_layout(self):
        text = venue_csv_dumps({"b": [1, 2], "a": [0, 7]}, window_start=1000, bin_width=1800)
        lines = text.splitlines()
        assert lines[0] == "venue_id,bin_index,bin_start,count"
        # venues sorted, bins in order
        assert lines[1] == "a,0,1000,0"
        assert lines[2] == "a,1,2800,7"
        assert lines[3] == "b,0,1000,1"
        assert lines[4] == "b,1,2800,2"

    def test_round_trip(self):
        bins = {"stadium": [5, 0, 12], "cafe-1": [1, 1, 1]}
        text = venue_csv_dumps(bins, window_start=86_400, bin_width=1800)
        back, start, width = read_venue_csv(io.StringIO(text))
        assert back == bins
        assert start == 86_400
        assert width == 1800

    def test_empty_table(self):
        back, start, width = read_venue_csv(io.StringIO("venue_id,bin_index,bin_start,count\n"))
        assert back == {}
        assert start is None and width is None

    def test_header_required(self):
        with pytest.raises(InvalidArgument):
            read_venue_csv(io.StringIO("a,b\n1,2\n"))

    def test_bin_index_gap_rejected(self):
        text = "venue_id,bin_index,bin_start,count\nv,0,0,1\nv,2,3600,1\n"
        with pytest.raises(InvalidArgument):
            read_venue_csv(io.StringIO(text))


class TestOccupancyCsv:
    def test_round_trip(self):
        curve = occupancy_curve(
            [[1.0, 4.0, 2.0], [2.0, 5.0, 1.0], [0.0, 6.0, 3.0]],
            venue_id="stadium",
            bin_width=1800,
            confidence=0.9,
            seed=21,
            resamples=300,
        )
        back = read_occupancy_csv(io.StringIO(occupancy_csv_dumps(curve)))
        assert back == curve

    def test_header_row(self):
        curve = occupancy_curve([[1.0, 2.0]], venue_id="v")
        header = occupancy_csv_dumps(curve).splitlines()[0]
        assert header == (
            "venue_id,bin_start,bin_width,estimate,ci_low,ci_high,n_days,confidence,seed,resamples"
        )

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgument):
            read_occupancy_csv(io.StringIO("venue_id,bin_start,bin_width,estimate,ci_low,ci_high,n_days,confidence,seed,resamples\n"))


class TestRasterClose:
    def test_equal(self):
        a = raster(2, 2, [[1, 2], [3, 4]])
        assert raster_close(a, raster(2, 2, [[1, 2], [3, 4]]))

    def test_tolerance(self):
        a = raster(2, 2, [[1e6, 0], [0, 0]])
        b = raster(2, 2, [[1e6 + 1e-4, 0], [0, 0]])
        assert raster_close(a, b, rel=1e-9)
        c = raster(2, 2, [[1e6 + 10, 0], [0, 0]])
        assert not raster_close(a, c, rel=1e-9)

    def test_nodata_pattern_must_match(self):
        a = raster(2, 2, [[1, -9999.0], [3, 4]])
        b = raster(2, 2, [[1, 2], [3, 4]])
        assert not raster_close(a, b)
