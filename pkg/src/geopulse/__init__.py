"""Event-stream geospatial analytics: archive, batch/realtime views, rasters.

The package splits along the classic batch/speed/serving seam: an append-only
archive is the ground truth, batch views are recomputed from scratch up to a
watermark, a small realtime layer covers the tail, and the serving layer
merges the two exactly. Analytics (kernel density, population scaling,
occupancy curves) run on merged counts; the gateway exposes everything over
HTTP and a CLI.
"""

from .analytics import (
    OccupancyCurve,
    ScenarioSpec,
    cumulative_to_interval,
    dasymetric_add,
    kde,
    kernel_weights,
    occupancy_curve,
    rasterize,
    scale_to_population,
    split_by_scenario,
)
from .archive import ArchiveEntry, EventArchive, ReferenceRaster
from .batch import BatchView, VenueView, build_batch_view, build_venue_view
from .core import (
    DEFAULT_CELLSIZE,
    BoundingBox,
    GeoEvent,
    GridSpec,
    RasterGrid,
    Source,
    TimeWindow,
    cell_of,
    grid_dims,
)
from .engine import Engine
from .errors import (
    BinMismatch,
    DegenerateDensity,
    DuplicateEvent,
    FloorRegression,
    GeopulseError,
    IngestFailed,
    InvalidArgument,
    NameTaken,
    NoObservations,
    NotFound,
    OutOfBounds,
    OutOfOrderSeq,
    OverlappingScenarios,
    ReplayFailed,
    SpecMismatch,
    StorageFailure,
    UnknownView,
    ValidationError,
    WatermarkMismatch,
)
from .ingest import ReplayReport, ReplaySpec, replay, validate
from .serving import MergedView, QueryRequest, QueryResult
from .speed import RealtimeView, SpeedStore
from .views import ViewDescriptor

__version__ = "0.1.0"

__all__ = [
    "ArchiveEntry",
    "BatchView",
    "BinMismatch",
    "BoundingBox",
    "DEFAULT_CELLSIZE",
    "DegenerateDensity",
    "DuplicateEvent",
    "Engine",
    "EventArchive",
    "FloorRegression",
    "GeoEvent",
    "GeopulseError",
    "GridSpec",
    "IngestFailed",
    "InvalidArgument",
    "MergedView",
    "NameTaken",
    "NoObservations",
    "NotFound",
    "OccupancyCurve",
    "OutOfBounds",
    "OutOfOrderSeq",
    "OverlappingScenarios",
    "QueryRequest",
    "QueryResult",
    "RasterGrid",
    "RealtimeView",
    "ReferenceRaster",
    "ReplayFailed",
    "ReplayReport",
    "ReplaySpec",
    "ScenarioSpec",
    "Source",
    "SpecMismatch",
    "SpeedStore",
    "StorageFailure",
    "TimeWindow",
    "UnknownView",
    "ValidationError",
    "VenueView",
    "ViewDescriptor",
    "WatermarkMismatch",
    "build_batch_view",
    "build_venue_view",
    "cell_of",
    "cumulative_to_interval",
    "dasymetric_add",
    "grid_dims",
    "kde",
    "kernel_weights",
    "occupancy_curve",
    "rasterize",
    "replay",
    "scale_to_population",
    "split_by_scenario",
    "validate",
]
