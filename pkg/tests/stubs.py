"""Local stub HTTP servers for collector and webhook tests."""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse


@dataclass
class RequestRecord:
    at_monotonic: float
    method: str
    path: str
    query: dict[str, str]
    headers: dict[str, str] = field(default_factory=dict)
    body: bytes = b""


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _record(self) -> RequestRecord:
        parsed = urlparse(self.path)
        query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        record = RequestRecord(
            at_monotonic=time.monotonic(),
            method=self.command,
            path=parsed.path,
            query=query,
            headers={k: v for k, v in self.headers.items()},
            body=body,
        )
        self.server.stub.request_log.append(record)
        return record

    def _respond(self, status: int, payload, headers: dict[str, str] | None = None):
        body = json.dumps(payload).encode("utf-8") if payload is not None else b""
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.end_headers()
        if body:
            self.wfile.write(body)

    def do_GET(self):
        record = self._record()
        status, payload, headers = self.server.stub.handle(record)
        self._respond(status, payload, headers)

    def do_POST(self):
        record = self._record()
        status, payload, headers = self.server.stub.handle(record)
        self._respond(status, payload, headers)


class StubServer:
    """Threaded localhost server with a request log and scripted responses.

    Scripted responses are consumed per path prefix before normal handling,
    letting tests inject rate limits and server errors deterministically.
    """

    def __init__(self):
        self.request_log: list[RequestRecord] = []
        self.scripted: dict[str, deque] = {}
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self._httpd.stub = self
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    def start(self) -> "StubServer":
        self._thread.start()
        return self

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address
        return f"http://{host}:{port}"

    def script(self, path_prefix: str, status: int, payload=None, headers: dict | None = None, repeat: int = 1):
        queue = self.scripted.setdefault(path_prefix, deque())
        for _ in range(repeat):
            queue.append((status, payload, headers or {}))

    def _pop_scripted(self, path: str):
        for prefix, queue in self.scripted.items():
            if path.startswith(prefix) and queue:
                return queue.popleft()
        return None

    def handle(self, record: RequestRecord):
        scripted = self._pop_scripted(record.path)
        if scripted is not None:
            return scripted
        return self.route(record)

    def route(self, record: RequestRecord):
        return 404, {"message": "no route"}, {}


class CodeHostStub(StubServer):
    """GitHub-flavored code host: repo metadata plus paginated listings."""

    def __init__(self):
        super().__init__()
        self.repos: dict[tuple[str, str], dict] = {}

    def add_repo(self, owner: str, name: str, meta: dict, commits=None, contributors=None, pulls=None):
        self.repos[(owner, name)] = {
            "meta": meta,
            "commits": commits or [],
            "contributors": contributors or [],
            "pulls": pulls or [],
        }

    def route(self, record: RequestRecord):
        parts = record.path.strip("/").split("/")
        if len(parts) < 3 or parts[0] != "repos":
            return 404, {"message": "unknown path"}, {}
        key = (parts[1], parts[2])
        repo = self.repos.get(key)
        if repo is None:
            return 404, {"message": "repo not found"}, {}
        if len(parts) == 3:
            return 200, repo["meta"], {}
        listing = repo.get(parts[3])
        if listing is None:
            return 404, {"message": "unknown listing"}, {}
        per_page = int(record.query.get("per_page", "30"))
        page = int(record.query.get("page", "1"))
        start = (page - 1) * per_page
        return 200, listing[start : start + per_page], {}


class WebhookStub(StubServer):
    """Alert sink; default 200, scriptable to fail."""

    def __init__(self, status: int = 200):
        super().__init__()
        self.status = status
        self.received: list[RequestRecord] = []

    def route(self, record: RequestRecord):
        self.received.append(record)
        return self.status, {"ok": self.status < 300}, {}
