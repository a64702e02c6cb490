#!/usr/bin/env python3
"""Regenerate the 50-event demo run log used by the console UI tests.

A nine-question quiz agent invokes a summary agent on its last prompt, so a
playback renders ten prompt bubbles (all correct) and one nested child pane.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT / "src"))

from agentrun import (  # noqa: E402
    SandboxPolicy,
    ScriptedProvider,
    parse_schema,
    run_to_completion,
    start_run,
)
from agentrun.runlog import serialize_log  # noqa: E402

QUESTIONS = [
    ("Which port does SSH use by default?", {"A": "22", "B": "80"}, "A"),
    ("What does TLS provide?", {"A": "compression", "B": "encryption in transit"}, "B"),
    ("Which tool lists open ports on a host?", {"A": "nmap", "B": "top"}, "A"),
    ("What is a CVE?", {"A": "a vulnerability identifier", "B": "a router protocol"}, "A"),
    ("What does 2FA add?", {"A": "a second authentication factor", "B": "faster logins"}, "A"),
    ("Which record maps a hostname to an IPv4 address?", {"A": "MX", "B": "A"}, "B"),
    ("What does a WAF protect?", {"A": "web applications", "B": "wireless access"}, "A"),
    ("Which hash is collision-broken?", {"A": "SHA-256", "B": "MD5"}, "B"),
    ("What does SIEM aggregate?", {"A": "security events and logs", "B": "DNS zones"}, "A"),
]


def build_schema() -> str:
    prompts = []
    for i, (question, answers, answer) in enumerate(QUESTIONS):
        prompt: dict = {"prompt": question, "answers": answers, "answer": answer}
        if i >= 6:
            prompt["actions"] = ["note-taker"]
        if i == 8:
            prompt["invoke"] = {
                "agent-of-type": "Summary-Agent",
                "prompt-id": 1,
                "data-keys": ["note"],
            }
        prompts.append(prompt)
    doc = [
        {
            "id": "Quiz-Agent",
            "system-prompt": "Answer with a line 'ANSWER: <letter>'.",
            "prompts": prompts,
            "prompt-template": "Question: [question]\nA) [answers/A]\nB) [answers/B]",
            "evaluate": {
                "result-classes": [
                    {"class": "A", "pattern": "ANSWER: A"},
                    {"class": "B", "pattern": "ANSWER: B"},
                ]
            },
        },
        {
            "id": "Summary-Agent",
            "system-prompt": "You summarize quiz sessions.",
            "data": {"report-file": "summary.txt"},
            "prompts": [
                {
                    "prompt": "Summarize the quiz outcome in one line. Notes: [note]",
                    "actions": ["write-to-file", "note-taker"],
                }
            ],
        },
        {
            "kind": "function",
            "id": "note-taker",
            "function-kind": "execution",
            "command": "printf 'noted'",
            "outputs": ["note"],
        },
        {"kind": "llm-config", "id": "demo-replay", "provider": "replay", "model": "fixture-v1"},
        {"kind": "agent-config", "id": "quiz-demo", "agent-type": "Quiz-Agent",
         "llm-config": "demo-replay"},
    ]
    return json.dumps(doc)


def main() -> None:
    schema = parse_schema(build_schema())
    responses = [f"ANSWER: {answer}" for _, _, answer in QUESTIONS]
    responses.append("All nine questions were answered correctly.")
    remaining = list(responses)
    with tempfile.TemporaryDirectory(prefix="agentrun-ui-demo-") as workspace:
        state = start_run(
            schema,
            "quiz-demo",
            {"scripted": ScriptedProvider(lambda _m: remaining.pop(0))},
            SandboxPolicy(workspace_root=workspace),
            provider_override="scripted",
            seed=2024,
        )
        record = run_to_completion(state)
    assert record.status == "done", [e.payload for e in record.events if e.kind == "error"]
    assert len(record.events) == 50, f"expected 50 events, got {len(record.events)}"
    out = ROOT / "frontend" / "test" / "fixtures" / "demo.runlog.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(serialize_log(record.events), encoding="utf-8")
    print(f"wrote {out} ({len(record.events)} events)")


if __name__ == "__main__":
    main()
