"""Shared fixtures: verbatim listing documents, shipped schemas, and a
record-then-replay helper built on the scripted provider."""

from __future__ import annotations

from pathlib import Path

import pytest

from agentrun import (
    FixtureRecorder,
    FixtureStore,
    SandboxPolicy,
    ScriptedProvider,
    load_schema,
    run_to_completion,
    start_run,
)

DATA_DIR = Path(__file__).parent / "data"
SCHEMAS_DIR = Path(__file__).parent.parent / "schemas"


@pytest.fixture(scope="session")
def listing1_text() -> str:
    return (DATA_DIR / "listing1.agents.json").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def listing3_text() -> str:
    return (DATA_DIR / "listing3.agents.json").read_text(encoding="utf-8")


@pytest.fixture
def qa_schema():
    return load_schema(str(SCHEMAS_DIR / "qa-security.agents.json"))


@pytest.fixture
def netscan_schema():
    return load_schema(str(SCHEMAS_DIR / "network-scan.agents.json"))


@pytest.fixture
def audit_schema():
    return load_schema(str(SCHEMAS_DIR / "audit-chain.agents.json"))


SCAN_RESPONSE = """Here is a script that scans the requested network:

```shell
echo "Scanning 10.1.1.0/24 ..."
echo "Host 10.11.1.22 is up: port 139 open"
echo "Host 10.11.1.24 is up: ports 22,80 open"
echo "2 hosts up"
```
"""

AUDIT_REPORT_RESPONSE = """Security audit for 10.11.1.24 (network 10.1.1.0/24)

Hosts observed: 10.11.1.22 (port 139), 10.11.1.24 (ports 22, 80).
Port 139 suggests legacy SMB exposure; restrict or disable it.
Port 80 should redirect to TLS; verify the SSH configuration on 22.
"""

ACK_RESPONSE = "Acknowledged: the audit of 10.11.1.24 completed."


def qa_responses(schema) -> list[str]:
    agent_type = schema.find_type("Security-Q&A-Agent")
    return [f"ANSWER: {p.answer}" for p in agent_type.prompts]


def record_fixture_file(schema, root_config, responses, fixtures_path, workspace) -> Path:
    """Run the schema once against a scripted provider, recording fixtures."""
    remaining = list(responses)
    store = FixtureStore()
    recorder = FixtureRecorder(ScriptedProvider(lambda _msgs: remaining.pop(0)), store)
    Path(workspace).mkdir(parents=True, exist_ok=True)
    state = start_run(
        schema,
        root_config,
        {"scripted": recorder},
        SandboxPolicy(workspace_root=str(workspace)),
        provider_override="scripted",
        approve_all=True,
    )
    record = run_to_completion(state)
    assert record.status == "done", [e.payload for e in record.events if e.kind == "error"]
    store.save(fixtures_path)
    return Path(fixtures_path)


@pytest.fixture
def workspace(tmp_path) -> Path:
    ws = tmp_path / "workspace"
    ws.mkdir()
    return ws
