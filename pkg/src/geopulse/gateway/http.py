"""HTTP face of the engine.

Request and response bodies are parsed and shaped by hand so every error,
whatever its source, arrives as the same structured body:
``{"code": ..., "message": ..., "field": ...}`` with a status that reflects
the error class. Exports stream line by line; nothing materializes a whole
file in memory.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..core import GeoEvent
from ..engine import Engine
from ..errors import (
    BinMismatch,
    DegenerateDensity,
    DuplicateEvent,
    GeopulseError,
    InvalidArgument,
    NameTaken,
    NoObservations,
    NotFound,
    OutOfBounds,
    OverlappingScenarios,
    ReplayFailed,
    SpecMismatch,
    UnknownView,
    ValidationError,
)
from ..formats import iter_asc_lines, iter_ndjson_lines, iter_venue_csv_lines
from ..views import ViewDescriptor

# checked in order; first match wins
_STATUS_BY_TYPE: tuple[tuple[type[GeopulseError], int], ...] = (
    (OutOfBounds, 422),
    (UnknownView, 404),
    (NoObservations, 404),
    (NotFound, 404),
    (NameTaken, 409),
    (DuplicateEvent, 409),
    (BinMismatch, 400),
    (SpecMismatch, 400),
    (DegenerateDensity, 400),
    (OverlappingScenarios, 400),
    (ReplayFailed, 400),
    (ValidationError, 400),
    (InvalidArgument, 400),
)

_MEDIA_TYPES = {
    "asc": "text/plain; charset=utf-8",
    "csv": "text/csv; charset=utf-8",
    "ndjson": "application/x-ndjson",
}


def _status_of(exc: GeopulseError) -> int:
    for klass, status in _STATUS_BY_TYPE:
        if isinstance(exc, klass):
            return status
    return 500


def _error_body(exc: GeopulseError) -> dict:
    body = {"code": exc.code, "message": str(exc)}
    field = getattr(exc, "field", None)
    if field is not None:
        body["field"] = field
    return body


def _int_param(raw: str, name: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise InvalidArgument(f"{name} must be an integer", field=name) from None


def _float_param(raw: str, name: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise InvalidArgument(f"{name} must be a number", field=name) from None


async def _json_body(request: Request) -> dict:
    try:
        raw = json.loads(await request.body())
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise InvalidArgument("body is not valid JSON", field=None) from None
    if not isinstance(raw, dict):
        raise InvalidArgument("body must be a JSON object", field=None)
    return raw


def create_app(engine: Engine, console_dir: str = "") -> FastAPI:
    """Build the app. A non-empty ``console_dir`` also serves that directory
    of static files under /console for the web console; the API itself is
    unchanged either way."""
    app = FastAPI(title="geopulse", docs_url=None, redoc_url=None)
    # analysts run the console from a dev server as often as from /console
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET", "POST"], allow_headers=["*"]
    )

    @app.exception_handler(GeopulseError)
    async def handle_domain_error(request: Request, exc: GeopulseError):
        return JSONResponse(status_code=_status_of(exc), content=_error_body(exc))

    @app.post("/events")
    async def post_events(request: Request):
        body = await request.body()
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError:
            raise InvalidArgument("body is not UTF-8 text", field=None) from None
        lines = [line for line in text.splitlines() if line.strip()]
        accepted = rejected = parseable = 0
        last_seq = engine.archive.high_watermark()
        for line in lines:
            try:
                raw = json.loads(line)
            except json.JSONDecodeError:
                rejected += 1
                continue
            parseable += 1
            try:
                event = GeoEvent.from_record(raw)
            except ValidationError:
                rejected += 1
                continue
            try:
                last_seq = engine.ingest(event)
            except DuplicateEvent:
                rejected += 1
                continue
            accepted += 1
        if lines and parseable == 0:
            raise InvalidArgument("body contains no parseable records", field=None)
        return {"accepted": accepted, "rejected": rejected, "last_seq": last_seq}

    @app.get("/views")
    async def get_views():
        return {"views": engine.views_status()}

    @app.post("/views")
    async def post_views(request: Request):
        descriptor = ViewDescriptor.from_record(await _json_body(request))
        watermark = engine.register_view(descriptor)
        return {"registered": descriptor.name, "watermark": watermark}

    @app.post("/query")
    async def post_query(request: Request):
        return engine.query_record(await _json_body(request)).to_record()

    @app.get("/export/{view}")
    async def get_export(
        view: str,
        format: str = "",
        layer: str = "raw",
        radius: str = "2",
        population: str | None = None,
        baseline: str | None = None,
    ):
        if format not in _MEDIA_TYPES:
            raise InvalidArgument("format must be asc, csv, or ndjson", field="format")
        if layer not in ("raw", "kde", "final"):
            raise InvalidArgument("layer must be raw, kde, or final", field="layer")
        if format != "asc" and layer != "raw":
            raise InvalidArgument(f"layer={layer} exports rasters; use format=asc", field="format")
        if format == "ndjson":
            lines = iter_ndjson_lines(engine.admitted_events(view))
        elif format == "csv":
            merged = engine.merged(view)
            lines = iter_venue_csv_lines(
                merged.venue_bins, merged.descriptor.window.start, merged.descriptor.bin_width
            )
        else:
            raster = engine.layer_raster(
                view,
                layer=layer,
                radius=_int_param(radius, "radius"),
                population=_float_param(population, "population") if population is not None else None,
                baseline=baseline,
            )
            lines = iter_asc_lines(raster)
        return StreamingResponse(
            iter(lines),
            media_type=_MEDIA_TYPES[format],
            headers={
                "Content-Disposition": f'attachment; filename="{view}-{layer}.{format}"'
            },
        )

    @app.get("/occupancy/{venue}")
    async def get_occupancy(
        venue: str,
        bin: str = "1800",
        confidence: str = "0.95",
        seed: str = "0",
        resamples: str = "1000",
    ):
        curve = engine.occupancy(
            venue,
            bin_width=_int_param(bin, "bin"),
            confidence=_float_param(confidence, "confidence"),
            seed=_int_param(seed, "seed"),
            resamples=_int_param(resamples, "resamples"),
        )
        return curve.to_record()

    if console_dir:
        root = Path(console_dir)
        if not root.is_dir():
            raise InvalidArgument(f"console_dir {root} is not a directory", field="console_dir")
        app.mount("/console", StaticFiles(directory=root, html=True), name="console")

    return app
