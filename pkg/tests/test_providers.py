"""Request canonicalization, fixtures, replay, and HTTP provider wire shapes."""

from __future__ import annotations

import json
import os
import random
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from agentrun import (
    ChatRequest,
    Fixture,
    FixtureRecorder,
    FixtureStore,
    LlmConfig,
    ProviderError,
    ReplayMissError,
    ReplayProvider,
    ScriptedProvider,
    canonicalize_request,
    request_key,
)
from agentrun.providers import (
    LocalRuntimeProvider,
    OpenAiCompatProvider,
    build_request,
    project_conversation,
)


@dataclass
class Msg:
    role: str
    content: str
    origin: str = "llm"


REPLAY_CONFIG = LlmConfig(id="replay", provider="replay", model="fixture-v1")


def test_canonicalize_field_order_independent():
    a = ChatRequest(model="m", messages=({"role": "user", "content": "hi"},), temperature=0.0,
                    max_tokens=10, extra_params={"b": 1, "a": 2})
    b = ChatRequest(model="m", messages=({"content": "hi", "role": "user"},), temperature=0.0,
                    max_tokens=10, extra_params={"a": 2, "b": 1})
    assert canonicalize_request(a) == canonicalize_request(b)


def test_canonicalize_distinguishes_temperature():
    base = dict(model="m", messages=({"role": "user", "content": "hi"},), max_tokens=10)
    a = ChatRequest(temperature=0.0, **base)
    b = ChatRequest(temperature=0.7, **base)
    assert canonicalize_request(a) != canonicalize_request(b)


def test_canonicalize_no_random_collisions():
    rng = random.Random(7)
    keys = set()
    for _ in range(100):
        request = ChatRequest(
            model=f"m{rng.randint(0, 5)}",
            messages=tuple(
                {"role": rng.choice(["user", "assistant"]), "content": f"msg-{rng.random()}"}
                for _ in range(rng.randint(1, 4))
            ),
            temperature=rng.choice([0.0, 0.5]),
            max_tokens=rng.randint(1, 2048),
        )
        keys.add(request_key(request))
    assert len(keys) == 100


def test_projection_maps_action_output_to_user_role():
    wire = project_conversation(
        [
            Msg("system", "sys"),
            Msg("user", "hello"),
            Msg("assistant", "hi"),
            Msg("action-output", "scan output", origin="function:execute-shell"),
        ]
    )
    assert wire[0] == {"role": "system", "content": "sys"}
    assert wire[3]["role"] == "user"
    assert wire[3]["content"] == "EXECUTION RESULT (execute-shell):\nscan output"


def test_replay_hit_streams_one_terminal_chunk():
    conversation = [Msg("user", "Question: ...")]
    key = request_key(build_request(REPLAY_CONFIG, conversation))
    store = FixtureStore()
    store.put(Fixture(key=key, response="ANSWER: B"))
    chunks: list[str] = []
    text = ReplayProvider(store).complete(REPLAY_CONFIG, conversation, chunks.append)
    assert text == "ANSWER: B"
    assert chunks == ["ANSWER: B"]


def test_replay_miss_names_hash():
    conversation = [Msg("user", "unrecorded")]
    key = request_key(build_request(REPLAY_CONFIG, conversation))
    with pytest.raises(ReplayMissError) as exc:
        ReplayProvider(FixtureStore()).complete(REPLAY_CONFIG, conversation, lambda _: None)
    assert key in str(exc.value)


def test_record_then_replay_byte_identical(tmp_path):
    conversation = [Msg("user", "ping")]
    store = FixtureStore()
    recorder = FixtureRecorder(ScriptedProvider(lambda _m: "pong é"), store, tmp_path / "fx.jsonl")
    recorded = recorder.complete(REPLAY_CONFIG, conversation, lambda _: None)
    replayed = ReplayProvider(FixtureStore.load(tmp_path / "fx.jsonl")).complete(
        REPLAY_CONFIG, conversation, lambda _: None
    )
    assert replayed == recorded


def test_record_two_prompts_two_keys(tmp_path):
    store = FixtureStore()
    recorder = FixtureRecorder(ScriptedProvider(lambda m: "r"), store)
    recorder.complete(REPLAY_CONFIG, [Msg("user", "one")], lambda _: None)
    recorder.complete(REPLAY_CONFIG, [Msg("user", "two")], lambda _: None)
    assert len(store.fixtures) == 2


def test_rerecord_overwrites_with_warning(caplog):
    store = FixtureStore()
    recorder = FixtureRecorder(ScriptedProvider(lambda m: "v2"), store)
    key = request_key(build_request(REPLAY_CONFIG, [Msg("user", "x")]))
    store.put(Fixture(key=key, response="v1"))
    with caplog.at_level("WARNING"):
        recorder.complete(REPLAY_CONFIG, [Msg("user", "x")], lambda _: None)
    assert store.fixtures[key].response == "v2"
    assert any("re-recording" in r.message for r in caplog.records)


def test_fixture_collision_detected(tmp_path):
    path = tmp_path / "fx.jsonl"
    path.write_text(
        json.dumps({"key": "k", "model": "m", "response": "a"}) + "\n"
        + json.dumps({"key": "k", "model": "m", "response": "b"}) + "\n"
    )
    with pytest.raises(ProviderError, match="collision"):
        FixtureStore.load(path)


# --- HTTP stubs ---------------------------------------------------------------


class _StubHandler(BaseHTTPRequestHandler):
    chunks: list[str] = []
    seen: list[dict] = []
    style = "openai"

    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        type(self).seen.append({"path": self.path, "body": body, "auth": self.headers.get("Authorization")})
        self.send_response(200)
        if type(self).style == "openai":
            self.send_header("Content-Type", "text/event-stream")
            self.end_headers()
            for chunk in type(self).chunks:
                event = {"choices": [{"delta": {"content": chunk}}]}
                self.wfile.write(f"data: {json.dumps(event)}\n\n".encode())
            self.wfile.write(b"data: [DONE]\n\n")
        elif type(self).style == "local-single":
            # non-streaming runtime: one JSON object, no done marker
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(json.dumps({"message": {"content": type(self).chunks[0]}}).encode())
        else:
            self.send_header("Content-Type", "application/x-ndjson")
            self.end_headers()
            for i, chunk in enumerate(type(self).chunks):
                done = i == len(type(self).chunks) - 1
                self.wfile.write(
                    (json.dumps({"message": {"content": chunk}, "done": done}) + "\n").encode()
                )


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubHandler.seen = []
    yield server
    server.shutdown()


def _endpoint(server) -> str:
    return f"http://127.0.0.1:{server.server_address[1]}"


def test_openai_compat_stream_assembly(stub_server):
    _StubHandler.style = "openai"
    _StubHandler.chunks = ["AN", "SWER: ", "B"]
    config = LlmConfig(id="oa", provider="openai-compatible", endpoint=_endpoint(stub_server),
                       model="gpt-test", temperature=0.0, max_tokens=64)
    received: list[str] = []
    text = OpenAiCompatProvider().complete(config, [Msg("user", "q")], received.append)
    assert text == "ANSWER: B"
    assert "".join(received) == text
    sent = _StubHandler.seen[0]
    assert sent["path"] == "/chat/completions"
    assert sent["body"]["model"] == "gpt-test"
    assert sent["body"]["stream"] is True
    assert sent["body"]["messages"] == [{"role": "user", "content": "q"}]


def test_openai_compat_auth_header_from_env(stub_server, monkeypatch):
    _StubHandler.style = "openai"
    _StubHandler.chunks = ["ok"]
    monkeypatch.setenv("STUB_API_KEY", "sk-test-123")
    config = LlmConfig(id="oa", provider="openai-compatible", endpoint=_endpoint(stub_server),
                       model="m", api_key_env="STUB_API_KEY")
    OpenAiCompatProvider().complete(config, [Msg("user", "q")], lambda _: None)
    assert _StubHandler.seen[0]["auth"] == "Bearer sk-test-123"


def test_openai_compat_missing_key_env_errors(stub_server):
    config = LlmConfig(id="oa", provider="openai-compatible", endpoint=_endpoint(stub_server),
                       model="m", api_key_env="NO_SUCH_ENV_VAR")
    assert "NO_SUCH_ENV_VAR" not in os.environ
    with pytest.raises(ProviderError, match="NO_SUCH_ENV_VAR"):
        OpenAiCompatProvider().complete(config, [Msg("user", "q")], lambda _: None)


def test_local_runtime_line_chunks(stub_server):
    _StubHandler.style = "local"
    _StubHandler.chunks = ["hel", "lo"]
    config = LlmConfig(id="lr", provider="local-runtime", endpoint=_endpoint(stub_server), model="m")
    received: list[str] = []
    text = LocalRuntimeProvider().complete(config, [Msg("user", "q")], received.append)
    assert text == "hello"
    assert received == ["hel", "lo"]
    assert _StubHandler.seen[0]["path"] == "/api/chat"


def test_secrets_never_in_canonical_request(monkeypatch):
    monkeypatch.setenv("SECRET_KEY_ENV", "super-secret-value")
    config = LlmConfig(id="oa", provider="openai-compatible", endpoint="http://x",
                       model="m", api_key_env="SECRET_KEY_ENV")
    blob = canonicalize_request(build_request(config, [Msg("user", "q")]))
    assert b"super-secret-value" not in blob


def test_local_runtime_non_streaming_fallback(stub_server):
    _StubHandler.style = "local-single"
    _StubHandler.chunks = ["whole answer"]
    config = LlmConfig(id="lr", provider="local-runtime", endpoint=_endpoint(stub_server), model="m")
    text = LocalRuntimeProvider().complete(config, [Msg("user", "q")], lambda _: None)
    assert text == "whole answer"


def test_extra_params_passed_through(stub_server):
    _StubHandler.style = "openai"
    _StubHandler.chunks = ["ok"]
    config = LlmConfig(id="oa", provider="openai-compatible", endpoint=_endpoint(stub_server),
                       model="m", extra_params={"top_p": 0.5})
    OpenAiCompatProvider().complete(config, [Msg("user", "q")], lambda _: None)
    assert _StubHandler.seen[-1]["body"]["top_p"] == 0.5


def test_event_log_never_contains_api_key(stub_server, monkeypatch, tmp_path):
    """End-to-end scan: a run against a live-style endpoint leaves no trace of
    the key in the serialized event log."""
    from agentrun import SandboxPolicy, parse_schema, run_to_completion, start_run
    from agentrun.providers import OpenAiCompatProvider as OA
    from agentrun.runlog import serialize_log

    _StubHandler.style = "openai"
    _StubHandler.chunks = ["ANSWER: A"]
    monkeypatch.setenv("SCAN_TEST_KEY", "sk-scan-me-0123456789")
    schema = parse_schema(json.dumps([
        {"id": "T", "prompts": [{"prompt": "q"}],
         "evaluate": {"result-classes": [{"class": "A", "pattern": "ANSWER: A"}]}},
        {"kind": "llm-config", "id": "live", "provider": "openai-compatible",
         "endpoint": _endpoint(stub_server), "model": "m", "api-key-env": "SCAN_TEST_KEY"},
        {"kind": "agent-config", "id": "c", "agent-type": "T", "llm-config": "live"},
    ]))
    ws = tmp_path / "ws"
    ws.mkdir()
    state = start_run(schema, "c", {"openai-compatible": OA()},
                      SandboxPolicy(workspace_root=str(ws)))
    record = run_to_completion(state)
    assert record.status == "done"
    assert "sk-scan-me-0123456789" not in serialize_log(record.events)
