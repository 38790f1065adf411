"""Collector-facing record types."""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Mapping

from ..errors import ValidationError
from ..model import parse_canonical_id
from ..timeutil import format_ts, parse_ts


@dataclass(frozen=True, slots=True)
class RepoStats:
    """Raw repository counters for one project at one fetch instant.

    Activity counters use a trailing 90-day window. lines_of_code,
    mailing_list_posts_90d and downloads_90d are optional: many hosts do not
    expose them, and absence must not block scoring.
    """

    project: str
    contributors: int
    commits_total: int
    commits_90d: int
    forks: int
    stars: int
    open_pull_requests: int
    pull_requests_90d: int
    fetched_at: datetime
    lines_of_code: int | None = None
    mailing_list_posts_90d: int | None = None
    downloads_90d: int | None = None
    last_commit_at: datetime | None = None

    def __post_init__(self):
        parse_canonical_id(self.project)
        for name in ("contributors", "commits_total", "commits_90d", "forks", "stars",
                     "open_pull_requests", "pull_requests_90d"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValidationError(f"{name} must be a non-negative int, got {v!r}")
        for name in ("lines_of_code", "mailing_list_posts_90d", "downloads_90d"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 0):
                raise ValidationError(f"{name} must be a non-negative int or absent, got {v!r}")
        if self.commits_90d > self.commits_total:
            raise ValidationError("commits_90d must be <= commits_total")

    def to_dict(self) -> dict[str, Any]:
        return {
            "project": self.project,
            "contributors": self.contributors,
            "commits_total": self.commits_total,
            "commits_90d": self.commits_90d,
            "lines_of_code": self.lines_of_code,
            "forks": self.forks,
            "stars": self.stars,
            "open_pull_requests": self.open_pull_requests,
            "pull_requests_90d": self.pull_requests_90d,
            "mailing_list_posts_90d": self.mailing_list_posts_90d,
            "downloads_90d": self.downloads_90d,
            "last_commit_at": format_ts(self.last_commit_at) if self.last_commit_at else None,
            "fetched_at": format_ts(self.fetched_at),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RepoStats":
        last_commit = d.get("last_commit_at")
        return cls(
            project=d["project"],
            contributors=d["contributors"],
            commits_total=d["commits_total"],
            commits_90d=d["commits_90d"],
            lines_of_code=d.get("lines_of_code"),
            forks=d["forks"],
            stars=d["stars"],
            open_pull_requests=d["open_pull_requests"],
            pull_requests_90d=d["pull_requests_90d"],
            mailing_list_posts_90d=d.get("mailing_list_posts_90d"),
            downloads_90d=d.get("downloads_90d"),
            last_commit_at=parse_ts(last_commit) if last_commit else None,
            fetched_at=parse_ts(d["fetched_at"]),
        )


@dataclass(frozen=True, slots=True)
class CollectorCursor:
    """Opaque resume token per (collector, project); empty means start over."""

    token: str = ""

    def is_empty(self) -> bool:
        return self.token == ""

    def decode(self) -> dict[str, Any]:
        if self.is_empty():
            return {}
        try:
            return json.loads(base64.urlsafe_b64decode(self.token.encode("ascii")))
        except Exception as exc:
            raise ValidationError(f"corrupt collector cursor: {exc}") from None

    @classmethod
    def encode(cls, state: Mapping[str, Any]) -> "CollectorCursor":
        if not state:
            return cls("")
        blob = json.dumps(state, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return cls(base64.urlsafe_b64encode(blob).decode("ascii"))
