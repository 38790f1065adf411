"""Live code-host collector: paginated, rate-limit-aware metadata crawling.

Speaks a GitHub-flavored REST dialect (repo metadata plus commits,
contributors and pull-request listings). All listings are paginated to
exhaustion or to the per-call request budget; partially aggregated stats are
never emitted — a call either completes every field group or hands back a
resume cursor.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Any, Callable

import requests

from ..errors import AuthError, HostError, NotFound, RateLimited
from ..model import ProjectRecord, ProjectRef
from ..timeutil import format_ts, now_utc, parse_ts
from .types import CollectorCursor, RepoStats

COLLECTOR_ID = "code-host"
ACTIVITY_WINDOW_DAYS = 90

_PHASES = ("repo", "commits", "contributors", "pulls", "done")


class TokenBucket:
    """Per-host token bucket shared by all concurrent collectors for that host."""

    def __init__(self, rate: float = 50.0, capacity: float = 50.0,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.rate = rate
        self.capacity = capacity
        self._tokens = capacity
        self._clock = clock
        self._sleep = sleep
        self._stamp = clock()
        self._lock = threading.Lock()

    def acquire(self, tokens: float = 1.0) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= tokens:
                    self._tokens -= tokens
                    return
                wait = (tokens - self._tokens) / self.rate
            self._sleep(wait)


_HOST_BUCKETS: dict[str, TokenBucket] = {}
_HOST_BUCKETS_LOCK = threading.Lock()


def host_rate_limiter(base_url: str, rate: float = 50.0) -> TokenBucket:
    key = base_url.rstrip("/")
    with _HOST_BUCKETS_LOCK:
        bucket = _HOST_BUCKETS.get(key)
        if bucket is None:
            bucket = TokenBucket(rate=rate, capacity=rate)
            _HOST_BUCKETS[key] = bucket
        return bucket


@dataclass(frozen=True, slots=True)
class CodeHostResult:
    """Complete stats+record, or a resume cursor when the budget ran out."""

    record: ProjectRecord | None
    stats: RepoStats | None
    next_cursor: CollectorCursor

    @property
    def complete(self) -> bool:
        return self.next_cursor.is_empty()


def _ratelimit_wait(resp: requests.Response, now_epoch: float) -> float | None:
    """Advertised seconds until reset, or None if the response is not a rate limit."""
    if resp.status_code not in (403, 429):
        return None
    retry_after = resp.headers.get("Retry-After")
    if retry_after is not None:
        try:
            return max(0.0, float(retry_after))
        except ValueError:
            return None
    if resp.headers.get("X-RateLimit-Remaining") == "0":
        reset = resp.headers.get("X-RateLimit-Reset")
        if reset is not None:
            try:
                return max(0.0, float(reset) - now_epoch)
            except ValueError:
                return None
    return None


class CodeHostClient:
    """One collector instance; used by a single task at a time."""

    def __init__(
        self,
        base_url: str,
        auth_token: str = "",
        *,
        per_page: int = 100,
        request_budget: int | None = None,
        max_ratelimit_wait: float = 120.0,
        backoff_base: float = 0.5,
        backoff_cap: float = 30.0,
        max_5xx_retries: int = 4,
        session: requests.Session | None = None,
        sleep_fn: Callable[[float], None] = time.sleep,
        epoch_fn: Callable[[], float] = time.time,
        now_fn=now_utc,
        rate_limiter: TokenBucket | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.auth_token = auth_token
        self.per_page = per_page
        self.request_budget = request_budget
        self.max_ratelimit_wait = max_ratelimit_wait
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self.max_5xx_retries = max_5xx_retries
        self.session = session or requests.Session()
        self.sleep = sleep_fn
        self.epoch = epoch_fn
        self.now = now_fn
        self.bucket = rate_limiter or host_rate_limiter(self.base_url)

    def _get(self, path: str, params: dict[str, Any] | None = None) -> Any:
        headers = {"Accept": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        url = f"{self.base_url}{path}"
        server_errors = 0
        while True:
            self.bucket.acquire()
            try:
                resp = self.session.get(url, params=params, headers=headers, timeout=30)
            except requests.RequestException as exc:
                raise HostError(f"request to {url} failed: {exc}") from None
            wait = _ratelimit_wait(resp, self.epoch())
            if wait is not None:
                if wait > self.max_ratelimit_wait:
                    raise RateLimited(f"{url} rate limited for {wait:.0f}s", retry_after=wait)
                self.sleep(wait)
                continue
            if resp.status_code == 404:
                raise NotFound(f"{url} not found")
            if resp.status_code in (401, 403):
                raise AuthError(f"{url} rejected credentials ({resp.status_code})")
            if resp.status_code >= 500:
                server_errors += 1
                if server_errors > self.max_5xx_retries:
                    raise HostError(f"{url} kept failing ({resp.status_code}) after "
                                    f"{self.max_5xx_retries} retries")
                self.sleep(min(self.backoff_cap, self.backoff_base * 2 ** (server_errors - 1)))
                continue
            if resp.status_code != 200:
                raise HostError(f"{url} unexpected status {resp.status_code}")
            try:
                return resp.json()
            except ValueError as exc:
                raise HostError(f"{url} returned non-JSON body: {exc}") from None

    def collect(self, project: ProjectRef, cursor: CollectorCursor = CollectorCursor()) -> CodeHostResult:
        """Resume (or start) the crawl; complete result or a new cursor."""
        state = cursor.decode()
        if not state:
            cutoff = self.now().timestamp() - ACTIVITY_WINDOW_DAYS * 86400
            state = {
                "phase": "repo",
                "page": 1,
                "cutoff_epoch": cutoff,
                "repo": None,
                "commits_total": 0,
                "commits_90d": 0,
                "last_commit": None,
                "contributors": 0,
                "open_prs": 0,
                "prs_90d": 0,
            }
        requests_left = self.request_budget
        prefix = f"/repos/{project.owner}/{project.name}"

        while state["phase"] != "done":
            if requests_left is not None:
                if requests_left <= 0:
                    return CodeHostResult(None, None, CollectorCursor.encode(state))
                requests_left -= 1
            phase = state["phase"]
            if phase == "repo":
                state["repo"] = self._get(prefix)
                state["phase"], state["page"] = "commits", 1
                continue
            params = {"per_page": self.per_page, "page": state["page"]}
            if phase == "commits":
                items = self._get(f"{prefix}/commits", params)
                for item in items:
                    state["commits_total"] += 1
                    date_raw = ((item.get("commit") or {}).get("author") or {}).get("date")
                    if date_raw:
                        ts = parse_ts(date_raw)
                        if ts.timestamp() >= state["cutoff_epoch"]:
                            state["commits_90d"] += 1
                        if state["last_commit"] is None or ts > parse_ts(state["last_commit"]):
                            state["last_commit"] = format_ts(ts)
            elif phase == "contributors":
                items = self._get(f"{prefix}/contributors", params)
                state["contributors"] += len(items)
            elif phase == "pulls":
                items = self._get(f"{prefix}/pulls", {**params, "state": "all"})
                for item in items:
                    if item.get("state") == "open":
                        state["open_prs"] += 1
                    created = item.get("created_at")
                    if created and parse_ts(created).timestamp() >= state["cutoff_epoch"]:
                        state["prs_90d"] += 1
            else:
                raise HostError(f"corrupt cursor phase {phase!r}")
            if len(items) < self.per_page:
                idx = _PHASES.index(phase)
                state["phase"], state["page"] = _PHASES[idx + 1], 1
            else:
                state["page"] += 1

        return self._finish(project, state)

    def _finish(self, project: ProjectRef, state: dict[str, Any]) -> CodeHostResult:
        meta = state["repo"] or {}
        fetched_at = self.now()
        created_raw = meta.get("created_at")
        if not created_raw:
            raise HostError(f"host metadata for {project.canonical_id} lacks created_at")
        license_field = meta.get("license") or {}
        record = ProjectRecord(
            ref=project,
            description=meta.get("description"),
            primary_language=meta.get("language"),
            license=license_field.get("spdx_id") if isinstance(license_field, dict) else None,
            homepage=meta.get("homepage") or None,
            created_at=parse_ts(created_raw),
            fetched_at=fetched_at,
            topics=tuple(meta.get("topics") or ()),
        )
        stats = RepoStats(
            project=project.canonical_id,
            contributors=state["contributors"],
            commits_total=state["commits_total"],
            commits_90d=state["commits_90d"],
            forks=int(meta.get("forks_count") or 0),
            stars=int(meta.get("stargazers_count") or 0),
            open_pull_requests=state["open_prs"],
            pull_requests_90d=state["prs_90d"],
            last_commit_at=parse_ts(state["last_commit"]) if state["last_commit"] else None,
            fetched_at=fetched_at,
        )
        return CodeHostResult(record=record, stats=stats, next_cursor=CollectorCursor())


def collect_code_host(
    base_url: str,
    auth_token: str,
    project: ProjectRef,
    cursor: CollectorCursor = CollectorCursor(),
    **client_options,
) -> CodeHostResult:
    """Functional entry point over CodeHostClient."""
    client = CodeHostClient(base_url, auth_token, **client_options)
    return client.collect(project, cursor)
