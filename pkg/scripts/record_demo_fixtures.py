#!/usr/bin/env python3
"""Regenerate the replay fixture files shipped under schemas/fixtures/.

The canned responses here stand in for live model output so the example
schemas run deterministically out of the box.
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT / "tests"))

from agentrun import load_schema  # noqa: E402
from conftest import (  # noqa: E402
    ACK_RESPONSE,
    AUDIT_REPORT_RESPONSE,
    SCAN_RESPONSE,
    qa_responses,
    record_fixture_file,
)


def main() -> None:
    fixtures_dir = ROOT / "schemas" / "fixtures"
    fixtures_dir.mkdir(exist_ok=True)
    jobs = [
        ("qa-security.agents.json", "qa-replay", "qa-security.jsonl", None),
        ("network-scan.agents.json", "netscan-replay", "network-scan.jsonl", [SCAN_RESPONSE]),
        (
            "audit-chain.agents.json",
            "audit-replay",
            "audit-chain.jsonl",
            [SCAN_RESPONSE, AUDIT_REPORT_RESPONSE, ACK_RESPONSE],
        ),
    ]
    for schema_name, config, fixture_name, responses in jobs:
        schema = load_schema(str(ROOT / "schemas" / schema_name))
        if responses is None:
            responses = qa_responses(schema)
        with tempfile.TemporaryDirectory(prefix="agentrun-record-") as workspace:
            path = record_fixture_file(
                schema, config, responses, fixtures_dir / fixture_name, workspace
            )
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
