"""Operator CLI: ingest fixtures, score, serve, monitor, export, import.

Exit codes: 0 success, 1 runtime/IO failure, 2 user or validation error.
Every command that involves time takes --as-of so pipelines are reproducible;
wall clock is only the default. Human tables go to stdout; --json switches to
machine output, never mixed.
"""

from __future__ import annotations

import json
import logging
import threading
from datetime import datetime
from pathlib import Path

import click

from . import __version__
from .api import create_app
from .config import CONFIG_ENV_VAR, PlatformConfig, load_config
from .errors import (
    BadTimestamp,
    CollectorError,
    CrossdError,
    NotFound,
    SchemaError,
    StorageError,
    ValidationError,
)
from .model import parse_canonical_id
from .monitor import AlertLog, PlanEntry, RefreshPlan, tick
from .pipeline import MonitorService, ingest_bundle, refresh_live, score_stored
from .registry import default_registry
from .store import HealthStore
from .timeutil import format_ts, now_utc, parse_ts

logger = logging.getLogger(__name__)

EXIT_RUNTIME = 1
EXIT_USER = 2


def _fail(message: str, code: int) -> SystemExit:
    click.echo(f"error: {message}", err=True)
    return SystemExit(code)


def _as_of_option(f):
    return click.option(
        "--as-of",
        "as_of",
        default=None,
        metavar="RFC3339",
        help="Fixed instant for this run (default: now, UTC).",
    )(f)


def _parse_as_of(raw: str | None) -> datetime:
    if raw is None:
        return now_utc()
    try:
        return parse_ts(raw)
    except BadTimestamp as exc:
        raise _fail(str(exc), EXIT_USER)


def _load(ctx: click.Context) -> tuple[PlatformConfig, HealthStore]:
    try:
        cfg = load_config(ctx.obj.get("config_path"))
        return cfg, HealthStore(cfg.store_path)
    except ValidationError as exc:
        raise _fail(str(exc), EXIT_USER)
    except StorageError as exc:
        raise _fail(str(exc), EXIT_RUNTIME)


@click.group()
@click.version_option(version=__version__, prog_name="crossd")
@click.option(
    "--config",
    "config_path",
    default=None,
    metavar="FILE",
    help=f"Platform config file (or ${CONFIG_ENV_VAR}).",
)
@click.pass_context
def main(ctx: click.Context, config_path: str | None):
    """Continuous health monitoring and criticality scoring for OSS projects."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command()
@click.option("--fixtures", "fixtures_dir", default=None, metavar="DIR",
              help="Fixture bundle to ingest (default: config fixture_paths).")
@click.option("--project", "project_id", default=None, metavar="ID",
              help="Only this canonical project id.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@_as_of_option
@click.pass_context
def ingest(ctx, fixtures_dir, project_id, as_json, as_of):
    """Collect fixture bundles, validate them, and append to the store."""
    cfg, store = _load(ctx)
    instant = _parse_as_of(as_of)
    bundles = [Path(fixtures_dir)] if fixtures_dir else list(cfg.fixture_paths)
    if not bundles:
        raise _fail("no fixture bundle: pass --fixtures or set fixture_paths", EXIT_USER)
    ref = None
    if project_id is not None:
        try:
            ref = parse_canonical_id(project_id)
        except ValidationError as exc:
            raise _fail(str(exc), EXIT_USER)
    registry = default_registry()
    projects: list[str] = []
    inserted = 0
    deduplicated = 0
    try:
        for bundle in bundles:
            report = ingest_bundle(store, bundle, registry, instant, project=ref)
            projects.extend(report.projects)
            inserted += report.inserted
            deduplicated += report.deduplicated
    except (SchemaError, ValidationError, NotFound) as exc:
        raise _fail(str(exc), EXIT_USER)
    except StorageError as exc:
        raise _fail(str(exc), EXIT_RUNTIME)
    if as_json:
        click.echo(json.dumps({
            "projects": projects, "inserted": inserted, "deduplicated": deduplicated,
            "as_of": format_ts(instant),
        }, sort_keys=True))
    else:
        click.echo(f"ingested {len(projects)} projects: "
                   f"{inserted} observations inserted, {deduplicated} deduplicated")


def format_score_table(rows: list[dict]) -> str:
    """Fixed-layout table: project, criticality, critical flag, category scores."""
    header = ("PROJECT", "CRITICALITY", "CRITICAL", "SECURITY", "ACTIVITY", "RELEVANCE")
    width = max([len(header[0])] + [len(r["project"]) for r in rows]) + 2

    def fmt(value) -> str:
        return f"{value:.6f}" if value is not None else "-"

    lines = [f"{header[0]:<{width}}" + "".join(f"{h:>13}" for h in header[1:])]
    for r in rows:
        cells = (
            fmt(r["criticality"]),
            "yes" if r["is_critical"] else "no",
            fmt(r.get("security")),
            fmt(r.get("activity")),
            fmt(r.get("relevance")),
        )
        lines.append(f"{r['project']:<{width}}" + "".join(f"{c:>13}" for c in cells))
    return "\n".join(lines)


@main.command()
@click.option("--project", "project_id", default=None, metavar="ID")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@_as_of_option
@click.pass_context
def score(ctx, project_id, as_json, as_of):
    """Build and store health snapshots from the latest collected facts."""
    cfg, store = _load(ctx)
    instant = _parse_as_of(as_of)
    registry = default_registry()
    if project_id is not None:
        try:
            parse_canonical_id(project_id)
        except ValidationError as exc:
            raise _fail(str(exc), EXIT_USER)
        if project_id not in store.projects():
            raise _fail(f"unknown project {project_id}", EXIT_USER)
        targets = [project_id]
    else:
        targets = store.projects()
    snapshots = []
    try:
        for project in targets:
            snapshots.append(
                score_stored(store, project, registry, cfg.criticality, instant, cfg.category_weights)
            )
    except (ValidationError, NotFound) as exc:
        raise _fail(str(exc), EXIT_USER)
    except StorageError as exc:
        raise _fail(str(exc), EXIT_RUNTIME)
    if as_json:
        click.echo(json.dumps([s.to_dict() for s in snapshots], sort_keys=True))
        return
    rows = [
        {
            "project": s.project,
            "criticality": s.criticality,
            "is_critical": s.is_critical,
            **{k: s.category_scores.get(k) for k in ("security", "activity", "relevance")},
        }
        for s in snapshots
    ]
    if rows:
        click.echo(format_score_table(rows))
    else:
        click.echo("no projects in store")


@main.command()
@click.option("--out", "out_path", required=True, metavar="FILE")
@click.pass_context
def export(ctx, out_path):
    """Stream the whole store as newline-delimited JSON records."""
    _, store = _load(ctx)
    try:
        count = store.export_to(out_path)
    except StorageError as exc:
        raise _fail(str(exc), EXIT_RUNTIME)
    click.echo(f"exported {count} records to {out_path}")


@main.command(name="import")
@click.option("--in", "in_path", required=True, metavar="FILE")
@click.pass_context
def import_cmd(ctx, in_path):
    """Ingest a previously exported record stream."""
    _, store = _load(ctx)
    if not Path(in_path).is_file():
        raise _fail(f"import file {in_path} does not exist", EXIT_USER)
    try:
        counts = store.import_from(in_path)
    except ValidationError as exc:
        raise _fail(str(exc), EXIT_USER)
    except StorageError as exc:
        raise _fail(str(exc), EXIT_RUNTIME)
    click.echo(f"imported {counts['inserted']} records, {counts['deduplicated']} deduplicated")


@main.command()
@click.option("--live", is_flag=True, required=True, help="Collect from the configured code host.")
@click.option("--project", "project_id", required=True, metavar="ID")
@click.option("--budget", type=int, default=None, help="Max requests for this call.")
@_as_of_option
@click.pass_context
def refresh(ctx, live, project_id, budget, as_of):
    """Crawl one project live, then rescore it."""
    cfg, store = _load(ctx)
    instant = _parse_as_of(as_of)
    try:
        ref = parse_canonical_id(project_id)
    except ValidationError as exc:
        raise _fail(str(exc), EXIT_USER)
    host = cfg.hosts.get(ref.platform)
    if host is None:
        raise _fail(f"no host configured for platform {ref.platform!r}", EXIT_USER)
    registry = default_registry()
    try:
        counts = refresh_live(
            store, host.base_url, host.token, ref, registry, instant, request_budget=budget
        )
        snapshot = score_stored(store, ref.canonical_id, registry, cfg.criticality, instant,
                                cfg.category_weights)
    except CollectorError as exc:
        raise _fail(str(exc), EXIT_RUNTIME)
    except (ValidationError, NotFound) as exc:
        raise _fail(str(exc), EXIT_USER)
    click.echo(
        f"{ref.canonical_id}: {counts['inserted']} observations inserted, "
        f"criticality {snapshot.criticality:.6f}, critical={'yes' if snapshot.is_critical else 'no'}"
    )


@main.command()
@click.option("--poll-interval", type=float, default=5.0, show_default=True,
              help="Seconds between scheduler ticks.")
@click.pass_context
def serve(ctx, poll_interval):
    """Run the HTTP API and the monitor refresh loop until interrupted."""
    import uvicorn

    cfg, store = _load(ctx)
    registry = default_registry()
    alert_log = AlertLog(cfg.alert_log)
    app = create_app(
        store,
        registry,
        cfg.criticality,
        write_token=cfg.write_token,
        alert_log=alert_log,
        category_weights=cfg.category_weights,
        static_dir=str(cfg.static_dir) if cfg.static_dir else None,
    )
    service = MonitorService(
        store,
        registry,
        cfg.criticality,
        alert_log,
        category_weights=cfg.category_weights,
        activity_drop_fraction=cfg.activity_drop_fraction,
    )
    stop = threading.Event()

    def monitor_loop():
        plan = RefreshPlan(entries={})
        while not stop.wait(poll_interval):
            now = now_utc()
            entries = dict(plan.entries)
            for project in store.projects():
                if project not in entries:
                    snapshot = store.get_latest_snapshot(project)
                    critical = bool(snapshot and snapshot.is_critical)
                    cadence = cfg.critical_cadence if critical else cfg.normal_cadence
                    entries[project] = PlanEntry(cadence.total_seconds(), next_due=now)
            due, plan = tick(now, RefreshPlan(entries))
            if due:
                try:
                    for bundle in cfg.fixture_paths:
                        ingest_bundle(store, bundle, registry, now)
                    alerts = service.refresh_projects(due, now)
                    if alerts:
                        logger.info("delivered %d alerts", len(alerts))
                except CrossdError as exc:
                    logger.error("refresh failed: %s", exc)

    thread = threading.Thread(target=monitor_loop, name="crossd-monitor", daemon=True)
    thread.start()
    click.echo(f"serving on http://{cfg.api_host}:{cfg.api_port} (Ctrl-C to stop)")
    try:
        uvicorn.run(app, host=cfg.api_host, port=cfg.api_port, log_level="warning")
    finally:
        stop.set()
        thread.join(timeout=poll_interval + 1)
    click.echo("shut down cleanly")


@main.command()
@click.option("--out", "out_dir", required=True, metavar="DIR",
              help="Directory to publish the bundled JSON schemas into.")
def schemas(out_dir):
    """Export the bundled JSON schemas (the external data contract)."""
    from importlib import resources

    out = Path(out_dir)
    (out / "api").mkdir(parents=True, exist_ok=True)
    count = 0
    for package, target in (("crossd.schemas", out), ("crossd.schemas.api", out / "api")):
        for entry in resources.files(package).iterdir():
            if entry.name.endswith(".json"):
                (target / entry.name).write_text(entry.read_text(encoding="utf-8"), encoding="utf-8")
                count += 1
    click.echo(f"published {count} schemas to {out}")


if __name__ == "__main__":
    main()
