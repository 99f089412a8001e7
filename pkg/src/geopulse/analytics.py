"""Raster analytics: counting, kernel smoothing, dasymetric scaling, occupancy.

Everything here is pure: inputs in, new arrays out, no I/O and no hidden
state. Mass conservation is the load-bearing invariant; each transform
states what it preserves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import GeoEvent, GridSpec, RasterGrid, TimeWindow, cell_of
from .errors import (
    DegenerateDensity,
    InvalidArgument,
    NoObservations,
    OverlappingScenarios,
    SpecMismatch,
)

#: Kernel radius in cells (bandwidth): weights vanish at this center distance.
DEFAULT_RADIUS = 2


def rasterize(
    events: Iterable[GeoEvent],
    spec: GridSpec,
    window: TimeWindow | None = None,
) -> RasterGrid:
    """Count events per cell; one unit of mass per in-bounds, in-window event.

    Events outside the grid (or the window, when given) are dropped, so the
    raster total equals the number of events that landed in a cell.
    """
    counts = np.zeros(spec.shape)
    for ev in events:
        if window is not None and not window.contains(ev.ts):
            continue
        cell = cell_of(ev.lat, ev.lon, spec)
        if cell is not None:
            counts[cell] += 1.0
    return RasterGrid(spec=spec, values=counts)


def kernel_weights(radius: int = DEFAULT_RADIUS) -> np.ndarray:
    """Truncated quartic kernel on the (2r+1)^2 stencil, normalized to sum 1.

    Weight at center distance d (in cell units) is (1 - (d/r)^2)^2 for d < r
    and 0 otherwise; the corner ring at d == r is excluded by the strict
    inequality. For r=2 the raw weights are 1 at center, 0.5625 at the four
    edge neighbors, 0.25 at the four diagonals, total 4.25.
    """
    if not (isinstance(radius, int) and radius >= 1):
        raise InvalidArgument("radius must be a positive integer", field="radius")
    ax = np.arange(-radius, radius + 1)
    d2 = ax[:, None] ** 2 + ax[None, :] ** 2
    frac = d2 / float(radius * radius)
    w = np.where(frac < 1.0, (1.0 - frac) ** 2, 0.0)
    return w / w.sum()


def _convolve_same(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # shift-and-add with zero padding outside; kernel is small and symmetric
    radius = kernel.shape[0] // 2
    nrows, ncols = arr.shape
    out = np.zeros_like(arr)
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            w = kernel[dr + radius, dc + radius]
            if w == 0.0:
                continue
            src_r = slice(max(0, -dr), min(nrows, nrows - dr))
            src_c = slice(max(0, -dc), min(ncols, ncols - dc))
            dst_r = slice(max(0, dr), min(nrows, nrows + dr))
            dst_c = slice(max(0, dc), min(ncols, ncols + dc))
            out[dst_r, dst_c] += w * arr[src_r, src_c]
    return out


def kde(raster: RasterGrid, radius: int = DEFAULT_RADIUS) -> RasterGrid:
    """Smooth a count raster with the truncated quartic kernel.

    Near edges the kernel footprint is clipped; each source cell's outgoing
    weights are renormalized over the in-grid part of its footprint, so total
    mass is conserved exactly and the operator stays linear. Rasters holding
    nodata cells are rejected; smooth the count layer before masking.
    """
    if not raster.data_mask.all():
        raise InvalidArgument("kde input must not contain nodata cells", field="raster")
    kernel = kernel_weights(radius)
    support = _convolve_same(np.ones(raster.spec.shape), kernel)
    smoothed = _convolve_same(raster.values / support, kernel)
    return raster.with_values(smoothed)


def scale_to_population(raster: RasterGrid, population: float) -> RasterGrid:
    """Rescale a density surface so its data total equals ``population``.

    The relative spatial distribution is untouched. Population 0 yields a
    zero raster regardless of input mass; a positive population cannot be
    spread over a zero-mass density and is rejected.
    """
    if not (isinstance(population, (int, float)) and np.isfinite(population) and population >= 0):
        raise InvalidArgument("population must be a finite non-negative number", field="population")
    mask = raster.data_mask
    out = raster.values.copy()
    if population == 0:
        out[mask] = 0.0
        return raster.with_values(out)
    total = raster.data_total()
    if total <= 0.0 or not np.isfinite(total):
        raise DegenerateDensity(f"cannot scale raster with total {total} to a population")
    out[mask] = out[mask] * (population / total)
    return raster.with_values(out)


def dasymetric_add(baseline: RasterGrid, overlay: RasterGrid) -> RasterGrid:
    """Cellwise sum of a baseline raster and a modeled overlay.

    Grids must match. Nodata propagates: a cell is nodata in the result iff
    it is nodata in either input, and the overlay mass landing on baseline
    nodata cells is dropped (those cells have no ground truth to add to).
    """
    if not baseline.spec.same_tiling(overlay.spec):
        raise SpecMismatch("baseline and overlay grids differ", field="overlay")
    out = np.full(baseline.spec.shape, baseline.nodata)
    mask = baseline.data_mask & overlay.data_mask
    out[mask] = baseline.values[mask] + overlay.values[mask]
    return RasterGrid(spec=baseline.spec, values=out, nodata=baseline.nodata)


@dataclass(frozen=True)
class ScenarioSpec:
    """Named time slice of an event stream, e.g. the hours around kickoff."""

    name: str
    window: TimeWindow

    def __post_init__(self):
        if not self.name:
            raise InvalidArgument("scenario name must be non-empty", field="name")

    def to_record(self) -> dict:
        return {"name": self.name, "window": self.window.to_record()}

    @classmethod
    def from_record(cls, raw: Mapping) -> "ScenarioSpec":
        return cls(name=str(raw["name"]), window=TimeWindow.from_record(raw["window"]))


def split_by_scenario(
    events: Sequence[GeoEvent], scenarios: Sequence[ScenarioSpec]
) -> dict[str, list[GeoEvent]]:
    """Partition events into named scenario windows.

    Windows must be pairwise disjoint so no event is double-counted; events
    falling in no window are dropped. Every scenario appears in the result,
    empty or not.
    """
    seen: dict[str, ScenarioSpec] = {}
    for sc in scenarios:
        if sc.name in seen:
            raise OverlappingScenarios(f"duplicate scenario name {sc.name!r}")
        seen[sc.name] = sc
    ordered = sorted(scenarios, key=lambda sc: sc.window.start)
    for a, b in zip(ordered, ordered[1:]):
        if b.window.start < a.window.end:
            raise OverlappingScenarios(
                f"scenarios {a.name!r} and {b.name!r} overlap in time"
            )
    out: dict[str, list[GeoEvent]] = {sc.name: [] for sc in scenarios}
    for ev in events:
        for sc in ordered:
            if sc.window.contains(ev.ts):
                out[sc.name].append(ev)
                break
    return out


def cumulative_to_interval(cumulative: Sequence[int]) -> list[int]:
    """Per-bin increments of a running total.

    out[0] = cum[0]; out[i] = cum[i] - cum[i-1], clamped at 0 so a dip in
    the source series (an upstream correction) never produces a negative
    interval count.
    """
    out: list[int] = []
    prev = 0
    for v in cumulative:
        v = int(v)
        out.append(max(0, v - prev))
        prev = v
    return out


@dataclass(frozen=True)
class OccupancyCurve:
    """Relative occupancy over time-of-day bins with bootstrap confidence bands.

    ``estimate`` is normalized so its peak is exactly 1; bands bracket the
    estimate pointwise and stay within [0, 1]. ``bin_start_offsets`` are
    seconds from the day anchor for each bin.
    """

    venue_id: str
    bin_width: int
    bin_start_offsets: tuple[int, ...]
    estimate: tuple[float, ...]
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]
    n_days: int
    confidence: float
    seed: int
    resamples: int = field(default=1000)

    def to_record(self) -> dict:
        return {
            "venue_id": self.venue_id,
            "bin_width": self.bin_width,
            "n_days": self.n_days,
            "confidence": self.confidence,
            "seed": self.seed,
            "resamples": self.resamples,
            "bins": [
                {"start": s, "estimate": e, "ci_low": lo, "ci_high": hi}
                for s, e, lo, hi in zip(
                    self.bin_start_offsets, self.estimate, self.ci_low, self.ci_high
                )
            ],
        }


def _normalize_rows(curves: np.ndarray) -> np.ndarray:
    peaks = curves.max(axis=1, keepdims=True)
    safe = np.where(peaks > 0.0, peaks, 1.0)
    return curves / safe


def occupancy_curve(
    per_day_bins: Sequence[Sequence[float]],
    *,
    venue_id: str = "",
    bin_width: int = 1800,
    anchor_offset: int = 0,
    confidence: float = 0.95,
    resamples: int = 1000,
    seed: int = 0,
) -> OccupancyCurve:
    """Typical relative occupancy across observed days.

    Each row of ``per_day_bins`` is one day's raw counts over the same
    time-of-day bins. Days are first normalized to their own peak (so busy
    and quiet days contribute the same shape), averaged, and the mean is
    renormalized to peak 1. The confidence band is a percentile bootstrap
    over days: days are resampled with replacement, each resampled mean is
    renormalized the same way, and pointwise quantiles are taken. Bands are
    widened where needed so ci_low <= estimate <= ci_high pointwise.

    Days with no observations at all carry no shape information and are
    excluded; if none remain, NoObservations is raised. Deterministic for a
    fixed seed.
    """
    if not (0.0 < confidence < 1.0):
        raise InvalidArgument("confidence must lie in (0, 1)", field="confidence")
    if not (isinstance(bin_width, int) and bin_width > 0):
        raise InvalidArgument("bin_width must be a positive integer", field="bin_width")
    if resamples < 1:
        raise InvalidArgument("resamples must be positive", field="resamples")
    arr = np.asarray(per_day_bins, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise InvalidArgument("per_day_bins must be a non-empty 2-D table", field="per_day_bins")
    if (arr < 0).any() or not np.isfinite(arr).all():
        raise InvalidArgument("bin counts must be finite and non-negative", field="per_day_bins")

    arr = arr[arr.sum(axis=1) > 0.0]
    n_days, n_bins = arr.shape if arr.size else (0, 0)
    if n_days == 0:
        raise NoObservations(f"no observed days for venue {venue_id!r}")

    per_day = _normalize_rows(arr)
    mean = per_day.mean(axis=0)
    estimate = mean / mean.max()

    rng = np.random.default_rng(seed)
    picks = rng.integers(0, n_days, size=(resamples, n_days))
    boot_means = per_day[picks].mean(axis=1)
    boot = _normalize_rows(boot_means)
    alpha = (1.0 - confidence) / 2.0
    lo = np.quantile(boot, alpha, axis=0)
    hi = np.quantile(boot, 1.0 - alpha, axis=0)
    lo = np.clip(np.minimum(lo, estimate), 0.0, 1.0)
    hi = np.clip(np.maximum(hi, estimate), 0.0, 1.0)

    offsets = tuple(anchor_offset + i * bin_width for i in range(n_bins))
    return OccupancyCurve(
        venue_id=venue_id,
        bin_width=bin_width,
        bin_start_offsets=offsets,
        estimate=tuple(float(v) for v in estimate),
        ci_low=tuple(float(v) for v in lo),
        ci_high=tuple(float(v) for v in hi),
        n_days=n_days,
        confidence=confidence,
        seed=seed,
        resamples=resamples,
    )
