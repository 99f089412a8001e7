"""Report rendering: figures plus delimited tables for offline review.

Renders merged views as heatmap PNGs and occupancy curves as line charts
with confidence bands, each next to its machine-readable CSV twin. Uses the
non-interactive matplotlib backend; safe on headless machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analytics import OccupancyCurve
from .core import RasterGrid
from .errors import NoObservations

_CMAP = "magma"


def heatmap_png(raster: RasterGrid, path: str | Path, title: str) -> None:
    """Raster as an image in geographic orientation; nodata left blank."""
    b = raster.spec.bbox
    data = np.where(raster.data_mask, raster.values, np.nan)
    fig, ax = plt.subplots(figsize=(8, 6))
    img = ax.imshow(
        data,
        cmap=_CMAP,
        extent=(b.min_lon, b.max_lon, b.min_lat, b.max_lat),
        origin="upper",
        aspect="auto",
        interpolation="nearest",
    )
    fig.colorbar(img, ax=ax, label="count / density")
    ax.set_title(title)
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def occupancy_png(curve: OccupancyCurve, path: str | Path) -> None:
    """Estimate line inside its shaded confidence band, hours on the x axis."""
    hours = [s / 3600.0 for s in curve.bin_start_offsets]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.fill_between(
        hours, curve.ci_low, curve.ci_high, alpha=0.3,
        label=f"{int(curve.confidence * 100)}% band",
    )
    ax.plot(hours, curve.estimate, linewidth=1.5, label="estimate")
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel("hour of day (UTC)")
    ax.set_ylabel("relative occupancy")
    ax.set_title(f"{curve.venue_id} ({curve.n_days} days)")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(engine, out_dir: str | Path, views=None, venues=None) -> list[Path]:
    """Figures and CSV tables for the chosen views and venues.

    Defaults to every registered view; with no explicit venues, picks each
    view's busiest venue. Returns the written paths.
    """
    from .formats import venue_csv_dumps, occupancy_csv_dumps

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    names = list(views) if views else engine.registry.names()
    wanted = set(venues or ())
    for name in names:
        merged = engine.merged(name)
        png = out / f"{name}.png"
        heatmap_png(merged.counts, png, title=name)
        written.append(png)
        csv_path = out / f"{name}-venues.csv"
        csv_path.write_text(
            venue_csv_dumps(
                merged.venue_bins, merged.descriptor.window.start, merged.descriptor.bin_width
            ),
            encoding="utf-8",
        )
        written.append(csv_path)
        if not venues:
            totals = {v: sum(b) for v, b in merged.venue_bins.items()}
            if totals:
                busiest = max(sorted(totals), key=lambda v: totals[v])
                if totals[busiest] > 0:
                    wanted.add(busiest)
    for venue_id in sorted(wanted):
        try:
            curve = engine.occupancy(venue_id)
        except NoObservations:
            continue
        png = out / f"occupancy-{venue_id}.png"
        occupancy_png(curve, png)
        written.append(png)
        csv_path = out / f"occupancy-{venue_id}.csv"
        csv_path.write_text(occupancy_csv_dumps(curve), encoding="utf-8")
        written.append(csv_path)
    return written
