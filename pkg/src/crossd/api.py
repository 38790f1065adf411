"""HTTP surface: project catalogue, history, attestations, watchlists, registry.

Read endpoints are public; write endpoints require the configured bearer
token. Every non-2xx response body has the shape
{"status": ..., "code": ..., "message": ...}. Handlers are stateless; all
state access goes through the store's reader/writer contract.
"""

from __future__ import annotations

import hashlib
import json
import secrets
from datetime import datetime, timezone
from typing import Any, Mapping

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .engine import DependencyReport
from .errors import BadTimestamp, ValidationError
from .model import Attestation, CriticalityParams, MetricRegistry, parse_canonical_id
from .monitor import AlertLog, Delivery, WatchlistSubscription
from .pipeline import dependency_report_for
from .registry import registry_document
from .store import MAX_PAGE_LIMIT, HealthStore
from .timeutil import format_ts, now_utc, parse_ts

API_PREFIX = "/v1"


class ApiFail(Exception):
    """Carries the exact error body contract: status, machine code, message."""

    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"status": status, "code": code, "message": message},
    )


def _parse_int(raw: str | None, name: str, default: int, minimum: int = 0) -> int:
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ApiFail(422, "invalid_parameter", f"{name} must be an integer, got {raw!r}") from None
    if value < minimum:
        raise ApiFail(422, "invalid_parameter", f"{name} must be >= {minimum}")
    return value


def _parse_float(raw: str | None, name: str) -> float | None:
    if raw is None:
        return None
    try:
        return float(raw)
    except ValueError:
        raise ApiFail(422, "invalid_parameter", f"{name} must be a number, got {raw!r}") from None


def _parse_bool(raw: str | None, name: str) -> bool:
    if raw is None:
        return False
    lowered = raw.lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no"):
        return False
    raise ApiFail(422, "invalid_parameter", f"{name} must be a boolean, got {raw!r}")


def _parse_ts_param(raw: str | None, name: str, default: datetime) -> datetime:
    if raw is None:
        return default
    try:
        return parse_ts(raw)
    except BadTimestamp as exc:
        raise ApiFail(422, "invalid_parameter", f"{name}: {exc}") from None


def _project_or_422(project_id: str) -> str:
    try:
        return parse_canonical_id(project_id).canonical_id
    except ValidationError:
        raise ApiFail(
            422, "invalid_project_id", f"{project_id!r} is not a canonical project id"
        ) from None


def create_app(
    store: HealthStore,
    registry: MetricRegistry,
    params: CriticalityParams,
    write_token: str = "",
    alert_log: AlertLog | None = None,
    category_weights: Mapping[str, Mapping[str, float]] | None = None,
    static_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="crossd", version="0.1.0", docs_url=None, redoc_url=None)

    registry_doc = registry_document()
    registry_etag = '"' + hashlib.sha256(
        json.dumps(registry_doc, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest() + '"'

    @app.exception_handler(ApiFail)
    async def _api_fail(request: Request, exc: ApiFail):
        return _error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(StarletteHTTPException)
    async def _http_exc(request: Request, exc: StarletteHTTPException):
        code = {404: "not_found", 405: "method_not_allowed"}.get(exc.status_code, "http_error")
        return _error_response(exc.status_code, code, str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def _validation_exc(request: Request, exc: RequestValidationError):
        return _error_response(422, "invalid_parameter", str(exc.errors()[:1]))

    @app.exception_handler(Exception)
    async def _unexpected(request: Request, exc: Exception):
        return _error_response(500, "internal_error", f"{type(exc).__name__}: {exc}")

    def require_write_token(request: Request) -> None:
        header = request.headers.get("Authorization", "")
        if not write_token:
            raise ApiFail(401, "writes_disabled", "no write token is configured")
        if header != f"Bearer {write_token}":
            raise ApiFail(401, "unauthorized", "missing or invalid bearer token")

    async def read_json_body(request: Request) -> dict[str, Any]:
        try:
            payload = json.loads(await request.body() or b"{}")
        except json.JSONDecodeError as exc:
            raise ApiFail(422, "invalid_body", f"request body is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise ApiFail(422, "invalid_body", "request body must be a JSON object")
        return payload

    def row(record, snapshot) -> dict[str, Any]:
        return {"record": record.to_dict(), "snapshot": snapshot.to_dict() if snapshot else None}

    # -- read endpoints -----------------------------------------------------

    @app.get(f"{API_PREFIX}/projects")
    def list_projects(request: Request):
        q = request.query_params
        known = {"language", "license", "min_criticality", "critical_only", "q", "sort", "offset", "limit"}
        unknown = set(q.keys()) - known
        if unknown:
            raise ApiFail(422, "invalid_parameter", f"unknown parameters: {sorted(unknown)}")
        limit = _parse_int(q.get("limit"), "limit", default=50)
        if limit > MAX_PAGE_LIMIT:
            raise ApiFail(422, "invalid_parameter", f"limit must be <= {MAX_PAGE_LIMIT}")
        offset = _parse_int(q.get("offset"), "offset", default=0)
        sort = q.get("sort") or "criticality_desc"
        if sort not in ("criticality_desc", "name_asc"):
            raise ApiFail(422, "invalid_parameter", f"unknown sort {sort!r}")
        min_criticality = _parse_float(q.get("min_criticality"), "min_criticality")
        if min_criticality is not None and not 0.0 <= min_criticality <= 1.0:
            raise ApiFail(422, "invalid_parameter", "min_criticality must be within [0,1]")
        total, rows = store.list_projects(
            language=q.get("language"),
            license=q.get("license"),
            min_criticality=min_criticality,
            critical_only=_parse_bool(q.get("critical_only"), "critical_only"),
            text=q.get("q"),
            sort=sort,
            offset=offset,
            limit=limit,
        )
        return {
            "total": total,
            "offset": offset,
            "limit": limit,
            "sort": sort,
            "items": [row(r, s) for r, s in rows],
        }

    @app.get(f"{API_PREFIX}/metrics/definitions")
    def metric_definitions(request: Request):
        if request.headers.get("If-None-Match") == registry_etag:
            return Response(status_code=304, headers={"ETag": registry_etag})
        return JSONResponse(content=registry_doc, headers={"ETag": registry_etag})

    @app.get(f"{API_PREFIX}/ecosystem/summary")
    def ecosystem_summary():
        return store.ecosystem_summary()

    @app.get(f"{API_PREFIX}/alerts")
    def alert_feed(request: Request):
        limit = _parse_int(request.query_params.get("limit"), "limit", default=100)
        subscription = request.query_params.get("subscription")
        alerts = alert_log.read_all() if alert_log is not None else []
        if subscription:
            alerts = [a for a in alerts if a.subscription_id == subscription]
        return {"items": [a.to_dict() for a in alerts[-limit:][::-1]]}

    @app.get(API_PREFIX + "/projects/{project_id:path}/history")
    def project_history(project_id: str, request: Request):
        project = _project_or_422(project_id)
        q = request.query_params
        metric = q.get("metric")
        if not metric:
            raise ApiFail(422, "invalid_parameter", "metric parameter is required")
        if metric not in registry:
            raise ApiFail(422, "unknown_metric", f"metric {metric!r} is not in the registry")
        from_ts = _parse_ts_param(q.get("from"), "from", datetime(1970, 1, 1, tzinfo=timezone.utc))
        to_ts = _parse_ts_param(q.get("to"), "to", now_utc())
        if from_ts > to_ts:
            raise ApiFail(422, "invalid_parameter", "from must be <= to")
        observations = store.query_history(project, metric, from_ts, to_ts)
        return {
            "project": project,
            "metric": metric,
            "from": format_ts(from_ts),
            "to": format_ts(to_ts),
            "observations": [o.to_dict() for o in observations],
        }

    @app.post(API_PREFIX + "/projects/{project_id:path}/attestations", status_code=201)
    async def submit_attestation(project_id: str, request: Request):
        require_write_token(request)
        project = _project_or_422(project_id)
        snapshot = store.get_latest_snapshot(project)
        if snapshot is None or not snapshot.is_critical:
            raise ApiFail(
                409,
                "project_not_critical",
                "attestations are accepted for critical projects only",
            )
        body = await read_json_body(request)
        if body.get("project") not in (None, project):
            raise ApiFail(422, "invalid_body", "body project does not match the URL")
        metric_id = body.get("metric_id")
        if not metric_id or metric_id not in registry:
            raise ApiFail(422, "unknown_metric", f"metric {metric_id!r} is not in the registry")
        if registry.get(metric_id).kind != "qualitative":
            raise ApiFail(422, "invalid_body", f"metric {metric_id!r} is not qualitative")
        attestation_id = "att-" + secrets.token_hex(8)
        try:
            attestation = Attestation.from_dict(
                {
                    "id": attestation_id,
                    "project": project,
                    "metric_id": metric_id,
                    "assessor": body.get("assessor"),
                    "value": body.get("value"),
                    "evidence_uri": body.get("evidence_uri"),
                    "asserted_at": body.get("asserted_at") or format_ts(now_utc()),
                    "expires_at": body.get("expires_at"),
                }
            )
        except (ValidationError, BadTimestamp, KeyError, TypeError) as exc:
            raise ApiFail(422, "invalid_body", str(exc)) from None
        store.put_attestation(attestation)
        return JSONResponse(status_code=201, content=attestation.to_dict())

    @app.get(API_PREFIX + "/projects/{project_id:path}")
    def project_detail(project_id: str):
        project = _project_or_422(project_id)
        record = store.get_project_record(project)
        if record is None:
            raise ApiFail(404, "project_not_found", f"unknown project {project}")
        snapshot = store.get_latest_snapshot(project)
        as_of = snapshot.computed_at if snapshot else None
        report: DependencyReport = dependency_report_for(store, project, as_of=as_of)
        vulns = store.vulnerabilities(project, as_of=as_of)
        open_vulns = [
            v
            for v in vulns
            if v.fixed_at is None or (as_of is not None and v.fixed_at > as_of)
        ]
        return {
            "record": record.to_dict(),
            "snapshot": snapshot.to_dict() if snapshot else None,
            "dependency_report": report.to_dict(),
            "open_vulnerabilities": [v.to_dict() for v in open_vulns],
        }

    # -- watchlists ----------------------------------------------------------

    @app.post(f"{API_PREFIX}/watchlists", status_code=201)
    async def create_watchlist(request: Request):
        require_write_token(request)
        body = await read_json_body(request)
        sub_id = "sub-" + secrets.token_hex(8)
        try:
            subscription = WatchlistSubscription(
                id=sub_id,
                subscriber=body.get("subscriber") or "",
                projects=frozenset(body.get("projects") or ()),
                rules=frozenset(body.get("rules") or ()),
                delivery=Delivery.from_dict(body.get("delivery") or {}),
            )
        except (ValidationError, TypeError) as exc:
            raise ApiFail(422, "invalid_body", str(exc)) from None
        store.put_watchlist(subscription.to_dict())
        return JSONResponse(status_code=201, content=subscription.to_dict())

    @app.get(f"{API_PREFIX}/watchlists")
    def list_watchlists():
        return {"items": store.watchlists()}

    @app.get(API_PREFIX + "/watchlists/{sub_id}")
    def get_watchlist(sub_id: str):
        payload = store.get_watchlist(sub_id)
        if payload is None:
            raise ApiFail(404, "watchlist_not_found", f"unknown watchlist {sub_id}")
        return payload

    @app.delete(API_PREFIX + "/watchlists/{sub_id}", status_code=204)
    def delete_watchlist(sub_id: str, request: Request):
        require_write_token(request)
        if not store.delete_watchlist(sub_id):
            raise ApiFail(404, "watchlist_not_found", f"unknown watchlist {sub_id}")
        return Response(status_code=204)

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        # Dashboard assets, when built; mounted last so /v1 keeps precedence.
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="dashboard")

    return app
