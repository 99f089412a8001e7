"""Operator CLI.

Commands either run the HTTP service (`serve`) or work an engine offline
against a data directory (`replay`, `build-view`, `export`, `report`,
`load-views`). `gen-gameday` writes the bundled synthetic scenario. Errors
exit nonzero with the message on stderr.
"""

from __future__ import annotations

import functools
import json
import sys
import urllib.error
import urllib.request
from pathlib import Path

import click

from .. import gameday as gameday_mod
from ..batch import build_batch_view, build_venue_view
from ..engine import Engine
from ..errors import GeopulseError
from ..formats import write_asc_path
from ..ingest import ReplaySpec, replay
from ..report import write_report
from ..views import ViewDescriptor
from .config import load_config
from .http import create_app


def _fail_on_domain_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except GeopulseError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Spatio-temporal event analytics service."""


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None, help="key=value config file")
@_fail_on_domain_errors
def serve(config_path):
    """Start the HTTP service and the background batch recompute loop."""
    import uvicorn

    cfg = load_config(config_path)
    engine = Engine(cfg.data_dir, recompute_interval=cfg.recompute_interval)
    engine.start_recompute_loop()
    try:
        app = create_app(engine, console_dir=cfg.console_dir)
        uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")
    finally:
        engine.close()


def _replay_over_http(url: str, path: Path, speed: float) -> tuple[int, int]:
    import time as time_mod

    accepted = rejected = 0
    batch: list[str] = []
    last_ts = None

    def flush():
        nonlocal accepted, rejected
        if not batch:
            return
        data = "".join(batch).encode("utf-8")
        req = urllib.request.Request(
            url.rstrip("/") + "/events", data=data, headers={"Content-Type": "application/x-ndjson"}
        )
        with urllib.request.urlopen(req) as resp:
            body = json.loads(resp.read())
        accepted += body.get("accepted", 0)
        rejected += body.get("rejected", 0)
        batch.clear()

    with open(path, "r", encoding="utf-8") as fp:
        for line in fp:
            if not line.strip():
                continue
            if speed > 0:
                try:
                    ts = json.loads(line).get("ts")
                except json.JSONDecodeError:
                    ts = None
                if isinstance(ts, int):
                    if last_ts is not None and ts > last_ts:
                        flush()
                        time_mod.sleep((ts - last_ts) / speed)
                    last_ts = ts
            batch.append(line if line.endswith("\n") else line + "\n")
            if len(batch) >= 1000:
                flush()
    flush()
    return accepted, rejected


@main.command("replay")
@click.option("--file", "file_path", type=click.Path(), required=True, help="NDJSON event file")
@click.option("--speed", type=float, default=1.0, show_default=True, help="pace multiplier; 0 = flat out")
@click.option("--data-dir", type=click.Path(), default=None, help="ingest directly into this data dir")
@click.option("--url", default=None, help="ingest via a running service, e.g. http://127.0.0.1:8800")
@_fail_on_domain_errors
def replay_cmd(file_path, speed, data_dir, url):
    """Drive ingestion from an event file."""
    if (data_dir is None) == (url is None):
        click.echo("error: pass exactly one of --data-dir or --url", err=True)
        sys.exit(2)
    if url is not None:
        try:
            accepted, rejected = _replay_over_http(url, Path(file_path), speed)
        except (urllib.error.URLError, OSError) as exc:
            click.echo(f"error: cannot reach {url}: {exc}", err=True)
            sys.exit(1)
    else:
        with Engine(data_dir) as engine:
            report = replay(ReplaySpec(path=file_path, speed_factor=speed), engine.ingest)
            accepted, rejected = report.accepted, report.rejected
    click.echo(f"accepted {accepted} rejected {rejected}")


@main.command("build-view")
@click.option("--name", required=True, help="registered view name")
@click.option("--data-dir", type=click.Path(), required=True)
@_fail_on_domain_errors
def build_view_cmd(name, data_dir):
    """One-shot batch build; prints watermark and totals."""
    with Engine(data_dir) as engine:
        descriptor = engine.registry.get(name)
        view = build_batch_view(engine.archive, descriptor)
        venue_view = build_venue_view(engine.archive, descriptor)
        venue_total = sum(sum(b) for b in venue_view.bins.values())
        click.echo(
            f"view {name} watermark {view.watermark} "
            f"cells_total {view.counts.data_total():.10g} venue_total {venue_total}"
        )


@main.command("export")
@click.option("--view", "view_name", required=True)
@click.option("--format", "fmt", type=click.Choice(["asc", "csv", "ndjson"]), required=True)
@click.option("--layer", type=click.Choice(["raw", "kde", "final"]), default="raw", show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--data-dir", type=click.Path(), required=True)
@click.option("--radius", type=int, default=2, show_default=True, help="kde radius in cells")
@click.option("--population", type=float, default=None, help="population for layer=final")
@click.option("--baseline", default=None, help="reference raster name for layer=final")
@_fail_on_domain_errors
def export_cmd(view_name, fmt, layer, out_path, data_dir, radius, population, baseline):
    """Write a view layer to a file in the chosen format."""
    from ..formats import venue_csv_dumps, write_events_ndjson

    out = Path(out_path)
    with Engine(data_dir) as engine:
        if fmt == "ndjson":
            if layer != "raw":
                click.echo("error: format=ndjson exports events; use --layer raw", err=True)
                sys.exit(2)
            with open(out, "w", encoding="utf-8") as fp:
                n = write_events_ndjson(engine.admitted_events(view_name), fp)
            click.echo(f"wrote {n} events to {out}")
        elif fmt == "csv":
            if layer != "raw":
                click.echo("error: format=csv exports venue tables; use --layer raw", err=True)
                sys.exit(2)
            merged = engine.merged(view_name)
            out.write_text(
                venue_csv_dumps(
                    merged.venue_bins, merged.descriptor.window.start, merged.descriptor.bin_width
                ),
                encoding="utf-8",
            )
            click.echo(f"wrote venue table to {out}")
        else:
            raster = engine.layer_raster(
                view_name, layer=layer, radius=radius, population=population, baseline=baseline
            )
            write_asc_path(raster, out)
            click.echo(f"wrote {layer} raster to {out}")


@main.command("gen-gameday")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--days", type=int, default=gameday_mod.DEFAULT_DAYS, show_default=True)
@_fail_on_domain_errors
def gen_gameday_cmd(out_dir, seed, days):
    """Write the synthetic game-day scenario: events, manifest, baseline, views."""
    gd = gameday_mod.synthesize(seed, days=days)
    paths = gameday_mod.write_gameday(gd, out_dir)
    click.echo(
        f"wrote {len(gd.events)} events across {days} days to {paths['events'].parent}"
    )


@main.command("load-views")
@click.option("--file", "file_path", type=click.Path(), required=True, help="descriptor set (views.json)")
@click.option("--data-dir", type=click.Path(), required=True)
@click.option("--baseline", type=click.Path(), default=None, help="also register this .asc as a reference")
@_fail_on_domain_errors
def load_views_cmd(file_path, data_dir, baseline):
    """Register every descriptor in a views file (idempotent per name)."""
    from ..errors import NameTaken
    from ..formats import read_asc_path

    with open(file_path, "r", encoding="utf-8") as fp:
        doc = json.load(fp)
    with Engine(data_dir) as engine:
        loaded = skipped = 0
        for raw in doc.get("views", []):
            descriptor = ViewDescriptor.from_record(raw)
            try:
                engine.register_view(descriptor)
                loaded += 1
            except NameTaken:
                skipped += 1
        if baseline is not None:
            name = Path(baseline).stem
            try:
                engine.archive.register_reference(name, read_asc_path(baseline), {})
                click.echo(f"registered reference {name}")
            except NameTaken:
                click.echo(f"reference {name} already present")
        click.echo(f"loaded {loaded} views, {skipped} already present")


@main.command("report")
@click.option("--data-dir", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--view", "views", multiple=True, help="limit to these views")
@click.option("--venue", "venues", multiple=True, help="occupancy charts for these venues")
@_fail_on_domain_errors
def report_cmd(data_dir, out_dir, views, venues):
    """Render heatmaps and occupancy charts with their CSV tables."""
    with Engine(data_dir) as engine:
        written = write_report(engine, out_dir, views=views or None, venues=venues or None)
    for path in written:
        click.echo(str(path))


if __name__ == "__main__":
    main()
