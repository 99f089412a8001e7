"""Exception types shared across the engine.

Every error carries a stable ``code`` used verbatim by the HTTP layer, so
clients can switch on it without parsing messages.
"""

from __future__ import annotations


class GeopulseError(Exception):
    """Base class for all engine errors."""

    code = "error"

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.message = message
        self.field = field


class InvalidArgument(GeopulseError, ValueError):
    code = "invalid_argument"


class ValidationError(InvalidArgument):
    """A raw record failed validation; ``field`` names the offending field."""

    code = "validation_error"


class DuplicateEvent(GeopulseError):
    code = "duplicate_event"


class IngestFailed(GeopulseError):
    code = "ingest_failed"


class StorageFailure(GeopulseError):
    code = "storage_failure"


class ReplayFailed(GeopulseError):
    code = "replay_failed"


class NameTaken(GeopulseError):
    code = "name_taken"


class NotFound(GeopulseError):
    code = "not_found"


class UnknownView(NotFound):
    code = "unknown_view"


class OutOfOrderSeq(GeopulseError):
    """Sequence numbers reached the speed layer out of arrival order.

    Signals an ingestion wiring bug, never expected in normal operation.
    """

    code = "out_of_order_seq"


class FloorRegression(GeopulseError):
    code = "floor_regression"


class WatermarkMismatch(GeopulseError):
    """Batch watermark and realtime floor could not be paired; retry."""

    code = "watermark_mismatch"


class BinMismatch(InvalidArgument):
    code = "bin_mismatch"


class SpecMismatch(InvalidArgument):
    code = "spec_mismatch"


class DegenerateDensity(InvalidArgument):
    code = "degenerate_density"


class OverlappingScenarios(InvalidArgument):
    code = "overlapping_scenarios"


class NoObservations(GeopulseError):
    code = "no_observations"


class OutOfBounds(GeopulseError):
    code = "out_of_bounds"
