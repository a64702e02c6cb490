"""Chat-completion providers: OpenAI-compatible APIs, local runtimes, and a
deterministic record/replay backend.

All providers share one contract: ``complete(config, messages, sink)`` sends
the projected conversation, forwards every streamed chunk to ``sink`` in
order, and returns the full assistant text. API keys are read from the
environment variable named in the LLM config at send time and never stored
or logged.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import requests

from .errors import ProviderError, ReplayMissError
from .schema import LlmConfig

log = logging.getLogger(__name__)

REQUEST_TIMEOUT = 120.0
ACTION_OUTPUT_PREFIX = "EXECUTION RESULT"

Sink = Callable[[str], None]


class ConversationMessage(Protocol):
    role: str
    content: str
    origin: str


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[dict, ...]
    temperature: float
    max_tokens: int
    extra_params: dict = field(default_factory=dict)


def project_conversation(messages: Sequence[ConversationMessage]) -> list[dict]:
    """Map the agent conversation onto wire roles.

    Action outputs travel as user-role messages with an explicit marker
    prefix, which every chat API accepts.
    """
    wire = []
    for msg in messages:
        if msg.role == "action-output":
            fn_id = msg.origin.removeprefix("function:")
            wire.append(
                {"role": "user", "content": f"{ACTION_OUTPUT_PREFIX} ({fn_id}):\n{msg.content}"}
            )
        else:
            wire.append({"role": msg.role, "content": msg.content})
    return wire


def build_request(config: LlmConfig, messages: Sequence[ConversationMessage]) -> ChatRequest:
    return ChatRequest(
        model=config.model,
        messages=tuple(project_conversation(messages)),
        temperature=config.temperature,
        max_tokens=config.max_tokens,
        extra_params=dict(config.extra_params),
    )


def canonicalize_request(request: ChatRequest) -> bytes:
    """Stable byte serialization: sorted keys, verbatim message content."""
    doc = {
        "model": request.model,
        "messages": list(request.messages),
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
        "extra_params": request.extra_params,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def request_key(request: ChatRequest) -> str:
    return hashlib.sha256(canonicalize_request(request)).hexdigest()


# ---------------------------------------------------------------------------
# Fixtures (record/replay)
# ---------------------------------------------------------------------------


@dataclass
class Fixture:
    key: str
    response: str
    model: str = ""
    recorded_at: str = ""


class FixtureStore:
    """Line-delimited fixture records: {"key", "model", "response", "recorded-at"}."""

    def __init__(self) -> None:
        self.fixtures: dict[str, Fixture] = {}

    @classmethod
    def load(cls, path: str | Path) -> "FixtureStore":
        """Load one fixture file, or every *.jsonl file in a directory."""
        store = cls()
        p = Path(path)
        files: Iterable[Path]
        if p.is_dir():
            files = sorted(p.glob("*.jsonl"))
        elif p.exists():
            files = [p]
        else:
            raise ProviderError(f"fixtures path not found: {path}")
        for f in files:
            with open(f, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise ProviderError(f"corrupt fixture record at {f}:{lineno}") from exc
                    fx = Fixture(
                        key=rec["key"],
                        response=rec["response"],
                        model=rec.get("model", ""),
                        recorded_at=rec.get("recorded-at", ""),
                    )
                    existing = store.fixtures.get(fx.key)
                    if existing is not None and existing.response != fx.response:
                        raise ProviderError(
                            f"fixture key collision with differing responses: {fx.key} at {f}:{lineno}"
                        )
                    store.fixtures[fx.key] = fx
        return store

    def put(self, fixture: Fixture) -> None:
        if fixture.key in self.fixtures:
            log.warning("re-recording fixture %s (overwriting)", fixture.key)
        self.fixtures[fixture.key] = fixture

    def get(self, key: str) -> Fixture | None:
        return self.fixtures.get(key)

    def save(self, path: str | Path) -> None:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", encoding="utf-8") as fh:
            for fx in self.fixtures.values():
                fh.write(
                    json.dumps(
                        {
                            "key": fx.key,
                            "model": fx.model,
                            "response": fx.response,
                            "recorded-at": fx.recorded_at,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )


class ReplayProvider:
    """Returns recorded responses keyed by the canonical request hash."""

    def __init__(self, store: FixtureStore | None = None) -> None:
        self.store = store or FixtureStore()

    def complete(self, config: LlmConfig, messages: Sequence[ConversationMessage], sink: Sink) -> str:
        key = request_key(build_request(config, messages))
        fixture = self.store.get(key)
        if fixture is None:
            raise ReplayMissError(key)
        sink(fixture.response)
        return fixture.response


class ScriptedProvider:
    """Deterministic in-process provider for tests and fixture recording.

    ``script`` receives the wire-projected message list and returns the
    assistant text.
    """

    def __init__(self, script: Callable[[list[dict]], str]) -> None:
        self.script = script

    def complete(self, config: LlmConfig, messages: Sequence[ConversationMessage], sink: Sink) -> str:
        text = self.script(project_conversation(messages))
        sink(text)
        return text


class FixtureRecorder:
    """Wraps a live provider, persisting each (request, response) pair."""

    def __init__(self, inner, store: FixtureStore, path: str | Path | None = None) -> None:
        self.inner = inner
        self.store = store
        self.path = path

    def complete(self, config: LlmConfig, messages: Sequence[ConversationMessage], sink: Sink) -> str:
        request = build_request(config, messages)
        text = self.inner.complete(config, messages, sink)
        self.store.put(
            Fixture(
                key=request_key(request),
                response=text,
                model=config.model,
                recorded_at=_dt.datetime.now(_dt.timezone.utc).isoformat(),
            )
        )
        if self.path is not None:
            self.store.save(self.path)
        return text


# ---------------------------------------------------------------------------
# HTTP providers
# ---------------------------------------------------------------------------


def _auth_headers(config: LlmConfig) -> dict[str, str]:
    if not config.api_key_env:
        return {}
    key = os.environ.get(config.api_key_env)
    if key is None:
        raise ProviderError(f"API key environment variable not set: {config.api_key_env}")
    return {"Authorization": f"Bearer {key}"}


def _post_with_retry(url: str, **kwargs):
    try:
        return requests.post(url, timeout=REQUEST_TIMEOUT, **kwargs)
    except (requests.ConnectionError, requests.Timeout):
        # one retry on transport failures only; HTTP errors are not retried
        return requests.post(url, timeout=REQUEST_TIMEOUT, **kwargs)


class OpenAiCompatProvider:
    """POST <endpoint>/chat/completions with stream=true, SSE chunk parsing."""

    def complete(self, config: LlmConfig, messages: Sequence[ConversationMessage], sink: Sink) -> str:
        body = {
            "model": config.model,
            "messages": project_conversation(messages),
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
            "stream": True,
        }
        body.update(config.extra_params)
        url = config.endpoint.rstrip("/") + "/chat/completions"
        try:
            resp = _post_with_retry(
                url, json=body, headers=_auth_headers(config), stream=True
            )
        except requests.RequestException as exc:
            raise ProviderError(f"transport failure: {exc}") from exc
        if resp.status_code == 401 or resp.status_code == 403:
            raise ProviderError(f"authentication failed (HTTP {resp.status_code})")
        if resp.status_code != 200:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        parts: list[str] = []
        for raw in resp.iter_lines(decode_unicode=True):
            if not raw or not raw.startswith("data:"):
                continue
            payload = raw[len("data:") :].strip()
            if payload == "[DONE]":
                break
            try:
                chunk = json.loads(payload)
            except json.JSONDecodeError as exc:
                raise ProviderError(f"bad stream chunk: {payload[:100]}") from exc
            delta = chunk.get("choices", [{}])[0].get("delta", {})
            piece = delta.get("content")
            if piece is None:
                piece = chunk.get("choices", [{}])[0].get("message", {}).get("content")
            if piece:
                parts.append(piece)
                sink(piece)
        return "".join(parts)


class LocalRuntimeProvider:
    """POST <endpoint>/api/chat (local chat runtimes); line-delimited JSON
    chunks, with a non-streaming single-object fallback."""

    def complete(self, config: LlmConfig, messages: Sequence[ConversationMessage], sink: Sink) -> str:
        body = {
            "model": config.model,
            "messages": project_conversation(messages),
            "stream": True,
            "options": {"temperature": config.temperature, "num_predict": config.max_tokens},
        }
        body.update(config.extra_params)
        url = config.endpoint.rstrip("/") + "/api/chat"
        try:
            resp = _post_with_retry(url, json=body, headers=_auth_headers(config), stream=True)
        except requests.RequestException as exc:
            raise ProviderError(f"transport failure: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        parts: list[str] = []
        for raw in resp.iter_lines(decode_unicode=True):
            if not raw:
                continue
            try:
                chunk = json.loads(raw)
            except json.JSONDecodeError:
                continue
            piece = chunk.get("message", {}).get("content", "")
            if piece:
                parts.append(piece)
                sink(piece)
            if chunk.get("done"):
                break
        return "".join(parts)


def build_providers(fixtures_path: str | Path | None = None) -> dict[str, object]:
    """Provider registry keyed by the schema's provider names."""
    store = FixtureStore.load(fixtures_path) if fixtures_path else FixtureStore()
    return {
        "replay": ReplayProvider(store),
        "openai-compatible": OpenAiCompatProvider(),
        "local-runtime": LocalRuntimeProvider(),
    }
