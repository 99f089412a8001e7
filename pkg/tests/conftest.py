from __future__ import annotations

import pytest

from geopulse.core import BoundingBox, GridSpec


@pytest.fixture
def small_spec() -> GridSpec:
    """A 12x12 grid with an exact-multiple extent."""
    cs = 1.0 / 1200.0
    return GridSpec(
        bbox=BoundingBox(min_lat=35.0, min_lon=-84.0, max_lat=35.0 + 12 * cs, max_lon=-84.0 + 12 * cs),
        cellsize=cs,
    )
