"""Headless-client coverage of the event-stream/control API."""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

import pytest
import requests

from agentrun import SandboxPolicy, start_run
from agentrun.providers import build_providers
from agentrun.server import serve
from conftest import SCAN_RESPONSE, SCHEMAS_DIR, qa_responses, record_fixture_file


class ServerHarness:
    def __init__(self, schema, fixtures, workspace, approve_all=False, default_config=None):
        registry = build_providers(fixtures)
        ws = Path(workspace)
        ws.mkdir(parents=True, exist_ok=True)

        def factory(root_config=None, seed=None, observers=(), approver=None):
            return start_run(
                schema,
                root_config or default_config,
                registry,
                SandboxPolicy(workspace_root=str(ws)),
                seed=0 if seed is None else seed,
                observers=observers,
                approver=approver,
                approve_all=approve_all,
            )

        self.server = serve(schema, factory, port=0)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()
        self.base = f"http://127.0.0.1:{self.server.server_address[1]}"

    def stop(self):
        self.server.shutdown()

    def events(self, since: int = 0, timeout: float = 10.0, until: str = "run-finished") -> list[dict]:
        """Consume the SSE stream until the given event kind (or timeout).

        chunk_size=1 matters: urllib3 otherwise buffers reads to the chunk
        size and a live (unfinished) stream would stall mid-run.
        """
        collected = []
        with requests.get(
            f"{self.base}/api/events", params={"since": since}, stream=True, timeout=timeout
        ) as resp:
            assert resp.status_code == 200
            assert resp.headers["Content-Type"].startswith("text/event-stream")
            for line in resp.iter_lines(chunk_size=1, decode_unicode=True):
                if line.startswith("data: "):
                    collected.append(json.loads(line[len("data: "):]))
                    if collected[-1]["kind"] == until:
                        break
        return collected

    def wait_for_kind(self, kind: str, timeout: float = 5.0) -> dict:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            current = self.snapshot()
            for event in current:
                if event["kind"] == kind:
                    return event
            time.sleep(0.05)
        raise AssertionError(f"no {kind} event within {timeout}s")

    def snapshot(self) -> list[dict]:
        host = self.server.run_host
        return [e.to_json() for e in host.events_since(0)]


@pytest.fixture
def qa_harness(qa_schema, tmp_path, workspace):
    fixtures = record_fixture_file(
        qa_schema, "qa-replay", qa_responses(qa_schema), tmp_path / "fx.jsonl", workspace
    )
    harness = ServerHarness(qa_schema, fixtures, tmp_path / "serve-ws",
                            approve_all=True, default_config="qa-replay")
    yield harness
    harness.stop()


@pytest.fixture
def gated_harness(netscan_schema, tmp_path, workspace):
    """Network-scan run without approve-all: execute-shell parks for approval."""
    fixtures = record_fixture_file(
        netscan_schema, "netscan-replay", [SCAN_RESPONSE], tmp_path / "fx.jsonl", workspace
    )
    harness = ServerHarness(netscan_schema, fixtures, tmp_path / "serve-ws",
                            approve_all=False, default_config="netscan-replay")
    yield harness
    harness.stop()


def test_start_and_stream_in_order(qa_harness):
    resp = requests.post(f"{qa_harness.base}/api/runs", json={})
    assert resp.status_code == 202
    events = qa_harness.events()
    assert events[0]["kind"] == "run-started"
    assert events[0]["seq"] == 1
    seqs = [e["seq"] for e in events]
    assert seqs == sorted(seqs)
    assert seqs == list(range(1, len(seqs) + 1))
    assert events[-1]["payload"]["status"] == "done"


def test_resume_with_since(qa_harness):
    requests.post(f"{qa_harness.base}/api/runs", json={})
    all_events = qa_harness.events()
    tail = qa_harness.events(since=5)
    assert [e["seq"] for e in tail] == [e["seq"] for e in all_events if e["seq"] > 5]


def test_schema_and_summary_endpoints(qa_harness):
    schema_resp = requests.get(f"{qa_harness.base}/api/schema")
    assert schema_resp.status_code == 200
    assert any(t.get("id") == "Security-Q&A-Agent" for t in schema_resp.json()
               if isinstance(t, dict))
    requests.post(f"{qa_harness.base}/api/runs", json={})
    qa_harness.events()
    summary = requests.get(f"{qa_harness.base}/api/summary").json()
    assert summary["rows"][0]["totals"]["correct"] == 10


def test_approval_park_approve_resume(gated_harness):
    requests.post(f"{gated_harness.base}/api/runs", json={})
    request_event = gated_harness.wait_for_kind("approval-requested")
    assert request_event["payload"]["function_id"] == "execute-shell"
    # the engine must stay parked for the whole probe window
    time.sleep(2.0)
    parked = gated_harness.snapshot()
    assert not [e for e in parked if e["kind"] == "action-executed"
                and e["payload"].get("function_id") == "execute-shell"]
    assert gated_harness.server.run_host.state.status == "awaiting-approval"
    resp = requests.post(
        f"{gated_harness.base}/api/approvals/{request_event['seq']}",
        json={"decision": "approve"},
    )
    assert resp.status_code == 200
    events = gated_harness.events()
    resolved = [e for e in events if e["kind"] == "approval-resolved"][0]
    assert resolved["payload"]["approved"] is True
    executed = [e for e in events if e["kind"] == "action-executed"
                and e["payload"]["function_id"] == "execute-shell"]
    assert executed, "execute-shell must run after approval"
    assert events[-1]["payload"]["status"] == "done"


def test_live_stream_delivers_midrun_events(gated_harness):
    """The SSE stream must deliver events while the run is parked, not only
    after it finishes."""
    requests.post(f"{gated_harness.base}/api/runs", json={})
    live = gated_harness.events(until="approval-requested", timeout=5.0)
    assert live[0]["kind"] == "run-started"
    assert live[-1]["kind"] == "approval-requested"
    seq = live[-1]["seq"]
    requests.post(f"{gated_harness.base}/api/approvals/{seq}", json={"decision": "approve"})
    rest = gated_harness.events(since=seq)
    assert rest[-1]["payload"]["status"] == "done"


def test_approval_deny_aborts(gated_harness):
    requests.post(f"{gated_harness.base}/api/runs", json={})
    request_event = gated_harness.wait_for_kind("approval-requested")
    resp = requests.post(
        f"{gated_harness.base}/api/approvals/{request_event['seq']}",
        json={"decision": "deny"},
    )
    assert resp.status_code == 200
    events = gated_harness.events()
    assert events[-1]["kind"] == "run-finished"
    assert events[-1]["payload"]["status"] == "aborted"
    executed = [e for e in events if e["kind"] == "action-executed"
                and e["payload"]["function_id"] == "execute-shell"]
    assert not executed


def test_stale_approval_rejected(qa_harness):
    requests.post(f"{qa_harness.base}/api/runs", json={})
    qa_harness.events()
    resp = requests.post(f"{qa_harness.base}/api/approvals/999", json={"decision": "approve"})
    assert resp.status_code == 404


def test_concurrent_start_conflicts(gated_harness):
    assert requests.post(f"{gated_harness.base}/api/runs", json={}).status_code == 202
    gated_harness.wait_for_kind("approval-requested")
    assert requests.post(f"{gated_harness.base}/api/runs", json={}).status_code == 409
    requests.post(f"{gated_harness.base}/api/abort")


def test_abort_endpoint(gated_harness):
    requests.post(f"{gated_harness.base}/api/runs", json={})
    gated_harness.wait_for_kind("approval-requested")
    resp = requests.post(f"{gated_harness.base}/api/abort")
    assert resp.status_code == 202
    events = gated_harness.events()
    assert events[-1]["payload"]["status"] == "aborted"


def test_static_ui_bundle_served(qa_schema, tmp_path, workspace):
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<!doctype html><title>console</title>")
    (ui / "app.js").write_text("console.log('ok')")
    from agentrun.server import serve as make_server

    server = make_server(qa_schema, lambda **kw: None, port=0, ui_dir=str(ui))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    try:
        index = requests.get(f"{base}/")
        assert index.status_code == 200
        assert "console" in index.text
        js = requests.get(f"{base}/app.js")
        assert js.status_code == 200
        assert js.headers["Content-Type"] == "application/javascript"
        assert requests.get(f"{base}/../secret").status_code == 404
        assert requests.get(f"{base}/missing.js").status_code == 404
    finally:
        server.shutdown()
