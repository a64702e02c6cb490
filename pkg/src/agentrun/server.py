"""Event-stream and control API consumed by the console UI and headless clients.

Endpoints (all JSON bodies/records share the run-log concrete syntax):

  GET  /api/events            server-sent event stream of run events, in seq
                              order; supports resume via Last-Event-ID header
                              or ?since=<seq>
  POST /api/runs              start a run (optional body {"config": id});
                              409 when a run is already active
  POST /api/approvals/<seq>   resolve a pending approval (body
                              {"decision": "approve"|"deny"}, default approve)
  POST /api/abort             abort the active run
  GET  /api/schema            the loaded schema document
  GET  /api/summary           summary table of events so far (partial mid-run)

Static files (the console UI bundle) are served from an optional directory
for every non-/api path. One run at a time; binds to loopback by default.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable

from .engine import ExecutionState, run_to_completion
from .runlog import RunEvent, render_table, summarize
from .schema import AgentSchema, serialize_schema

StateFactory = Callable[..., ExecutionState]


class RunHost:
    """Holds the active run, its event buffer, and pending approvals."""

    def __init__(self, schema: AgentSchema, state_factory: StateFactory) -> None:
        self.schema = schema
        self.state_factory = state_factory
        self.lock = threading.Lock()
        self.cond = threading.Condition(self.lock)
        self.events: list[RunEvent] = []
        self.state: ExecutionState | None = None
        self.thread: threading.Thread | None = None
        self.pending_approvals: dict[int, dict] = {}

    # engine-side callbacks -------------------------------------------------

    def _observer(self, event: RunEvent) -> None:
        with self.cond:
            self.events.append(event)
            self.cond.notify_all()

    def _approver(self, request: RunEvent) -> bool:
        entry: dict = {"decision": None}
        with self.cond:
            self.pending_approvals[request.seq] = entry
            self.cond.notify_all()
            while entry["decision"] is None:
                if self.state is not None and self.state.abort_requested:
                    entry["decision"] = "deny"
                    break
                self.cond.wait(timeout=0.2)
            del self.pending_approvals[request.seq]
        return entry["decision"] == "approve"

    # control surface -------------------------------------------------------

    def run_active(self) -> bool:
        return self.thread is not None and self.thread.is_alive()

    def start_run(self, config: str | None = None, seed: int | None = None) -> dict:
        with self.lock:
            if self.run_active():
                raise RunConflict("a run is already active")
            self.events.clear()
            self.pending_approvals.clear()
        kwargs = {"observers": [self._observer], "approver": self._approver}
        if config is not None:
            kwargs["root_config"] = config
        if seed is not None:
            kwargs["seed"] = seed
        state = self.state_factory(**kwargs)
        self.state = state

        def runner() -> None:
            run_to_completion(state)
            with self.cond:
                self.cond.notify_all()

        self.thread = threading.Thread(target=runner, daemon=True, name="agentrun-engine")
        self.thread.start()
        return {"status": "started"}

    def resolve_approval(self, seq: int, decision: str) -> dict:
        with self.cond:
            entry = self.pending_approvals.get(seq)
            if entry is None:
                raise UnknownApproval(f"no pending approval with seq {seq}")
            if entry["decision"] is not None:
                raise RunConflict("approval already resolved")
            entry["decision"] = decision
            self.cond.notify_all()
        return {"status": "resolved", "decision": decision}

    def abort(self) -> dict:
        with self.cond:
            if self.state is not None:
                self.state.abort_requested = True
            for entry in self.pending_approvals.values():
                if entry["decision"] is None:
                    entry["decision"] = "deny"
            self.cond.notify_all()
        return {"status": "aborting"}

    def events_since(self, since: int) -> list[RunEvent]:
        with self.lock:
            return [e for e in self.events if e.seq > since]

    def wait_for_events(self, since: int, timeout: float = 10.0) -> list[RunEvent]:
        with self.cond:
            fresh = [e for e in self.events if e.seq > since]
            if fresh:
                return fresh
            self.cond.wait(timeout=timeout)
            return [e for e in self.events if e.seq > since]

    def finished(self) -> bool:
        with self.lock:
            return bool(self.events) and self.events[-1].kind == "run-finished"


class RunConflict(Exception):
    pass


class UnknownApproval(Exception):
    pass


def make_handler(host: RunHost, ui_dir: str | None):
    ui_root = Path(ui_dir).resolve() if ui_dir else None

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # silence request logging
            pass

        def _send_json(self, status: int, obj: dict | list | str) -> None:
            body = (obj if isinstance(obj, str) else json.dumps(obj)).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if not length:
                return {}
            try:
                return json.loads(self.rfile.read(length).decode("utf-8"))
            except json.JSONDecodeError:
                return {}

        # GET ---------------------------------------------------------------

        def do_GET(self) -> None:
            path, _, query = self.path.partition("?")
            if path == "/api/events":
                self._stream_events(query)
            elif path == "/api/schema":
                self._send_json(200, serialize_schema(host.schema))
            elif path == "/api/summary":
                table = summarize(host.events_since(0), allow_partial=True)
                self._send_json(200, table.to_json())
            elif ui_root is not None:
                self._serve_static(path)
            else:
                self._send_json(404, {"error": "not found"})

        def do_HEAD(self) -> None:
            path = self.path.partition("?")[0]
            if ui_root is not None and not path.startswith("/api/"):
                self._serve_static(path, head_only=True)
            else:
                self.send_response(200)
                self.send_header("Content-Length", "0")
                self.end_headers()

        def _stream_events(self, query: str) -> None:
            since = 0
            if self.headers.get("Last-Event-ID"):
                since = int(self.headers["Last-Event-ID"])
            for part in query.split("&"):
                if part.startswith("since="):
                    since = int(part[len("since="):])
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Connection", "close")
            self.end_headers()
            last = since
            try:
                while True:
                    fresh = host.wait_for_events(last, timeout=1.0)
                    for event in fresh:
                        data = json.dumps(event.to_json(), ensure_ascii=False)
                        self.wfile.write(
                            f"id: {event.seq}\ndata: {data}\n\n".encode("utf-8")
                        )
                        last = event.seq
                    self.wfile.flush()
                    if fresh and fresh[-1].kind == "run-finished":
                        break
            except (BrokenPipeError, ConnectionResetError):
                pass

        def _serve_static(self, path: str, head_only: bool = False) -> None:
            rel = path.lstrip("/") or "index.html"
            target = (ui_root / rel).resolve()
            if not target.is_relative_to(ui_root) or not target.is_file():
                self._send_json(404, {"error": "not found"})
                return
            content_types = {
                ".html": "text/html",
                ".js": "application/javascript",
                ".css": "text/css",
                ".json": "application/json",
                ".map": "application/json",
            }
            body = target.read_bytes()
            self.send_response(200)
            self.send_header(
                "Content-Type", content_types.get(target.suffix, "application/octet-stream")
            )
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            if not head_only:
                self.wfile.write(body)

        # POST --------------------------------------------------------------

        def do_POST(self) -> None:
            path = self.path.partition("?")[0]
            body = self._read_body()
            if path == "/api/runs":
                try:
                    result = host.start_run(body.get("config"), body.get("seed"))
                    self._send_json(202, result)
                except RunConflict as exc:
                    self._send_json(409, {"error": str(exc)})
                except Exception as exc:  # unrunnable schema/config
                    self._send_json(400, {"error": str(exc)})
            elif path.startswith("/api/approvals/"):
                try:
                    seq = int(path.rsplit("/", 1)[1])
                except ValueError:
                    self._send_json(400, {"error": "bad approval seq"})
                    return
                decision = body.get("decision", "approve")
                if decision not in ("approve", "deny"):
                    self._send_json(400, {"error": "decision must be approve or deny"})
                    return
                try:
                    self._send_json(200, host.resolve_approval(seq, decision))
                except UnknownApproval as exc:
                    self._send_json(404, {"error": str(exc)})
                except RunConflict as exc:
                    self._send_json(409, {"error": str(exc)})
            elif path == "/api/abort":
                self._send_json(202, host.abort())
            else:
                self._send_json(404, {"error": "not found"})

    return Handler


def serve(
    schema: AgentSchema,
    state_factory: StateFactory,
    port: int = 8765,
    bind: str = "127.0.0.1",
    ui_dir: str | None = None,
) -> ThreadingHTTPServer:
    """Create (but do not start) the HTTP server; callers run serve_forever."""
    host = RunHost(schema, state_factory)
    handler = make_handler(host, ui_dir)
    server = ThreadingHTTPServer((bind, port), handler)
    server.run_host = host  # type: ignore[attr-defined]
    return server
