"""Append-only run-event log and the per-agent, per-prompt summary table.

The log is a UTF-8 line-delimited record file (extension ``.runlog.jsonl``),
one event per line, with strictly increasing gapless sequence numbers. The
summary assigns one terminal label per (agent instance, prompt) and
aggregates by agent type and LLM config.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import RunLogError

EVENT_KINDS = frozenset(
    {
        "run-started",
        "prompt-rendered",
        "llm-chunk",
        "llm-complete",
        "action-executed",
        "evaluation",
        "invoke",
        "agent-completed",
        "approval-requested",
        "approval-resolved",
        "error",
        "run-finished",
    }
)

LABELS = ("correct", "incorrect", "unmatched", "error")


@dataclass(frozen=True)
class RunEvent:
    seq: int
    timestamp: str
    kind: str
    instance_id: str | None = None
    prompt_index: int | None = None
    payload: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "instance_id": self.instance_id,
            "prompt_index": self.prompt_index,
            "payload": self.payload,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RunEvent":
        return cls(
            seq=obj["seq"],
            timestamp=obj["timestamp"],
            kind=obj["kind"],
            instance_id=obj.get("instance_id"),
            prompt_index=obj.get("prompt_index"),
            payload=obj.get("payload", {}),
        )


class LogWriter:
    """Write-ahead event sink: each event is appended and flushed before the
    engine proceeds. Rejects out-of-order sequence numbers."""

    def __init__(self, path: str, durable: bool = False) -> None:
        self.path = path
        self.durable = durable
        self._fh = open(path, "w", encoding="utf-8")
        self._last_seq = 0

    def append(self, event: RunEvent) -> None:
        if event.seq != self._last_seq + 1:
            raise RunLogError(
                f"out-of-order event seq {event.seq}, expected {self._last_seq + 1}"
            )
        self._fh.write(json.dumps(event.to_json(), ensure_ascii=False) + "\n")
        self._fh.flush()
        if self.durable:
            import os

            os.fsync(self._fh.fileno())
        self._last_seq = event.seq

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self) -> "LogWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_log(path: str, events: Iterable[RunEvent]) -> None:
    with LogWriter(path) as writer:
        for event in events:
            writer.append(event)


def read_log(path: str) -> list[RunEvent]:
    """Parse a run log; corrupt records fail with their line number."""
    events: list[RunEvent] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                event = RunEvent.from_json(obj)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise RunLogError(f"corrupt run log record: {exc}", line=lineno) from exc
            if event.kind not in EVENT_KINDS:
                raise RunLogError(f"unknown event kind '{event.kind}'", line=lineno)
            events.append(event)
    return events


def serialize_log(events: Iterable[RunEvent]) -> str:
    return "".join(json.dumps(e.to_json(), ensure_ascii=False) + "\n" for e in events)


def parse_log(text: str) -> list[RunEvent]:
    events = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            events.append(RunEvent.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise RunLogError(f"corrupt run log record: {exc}", line=lineno) from exc
    return events


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------


@dataclass
class SummaryRow:
    agent_type: str
    llm_config: str
    labels: dict[int, str] = field(default_factory=dict)  # prompt index -> label

    def totals(self) -> dict[str, int]:
        counts = {label: 0 for label in LABELS}
        for label in self.labels.values():
            counts[label] = counts.get(label, 0) + 1
        return counts


@dataclass
class SummaryTable:
    rows: list[SummaryRow] = field(default_factory=list)

    def row(self, agent_type: str, llm_config: str) -> SummaryRow | None:
        return next(
            (r for r in self.rows if r.agent_type == agent_type and r.llm_config == llm_config),
            None,
        )

    def totals(self) -> dict[str, int]:
        counts = {label: 0 for label in LABELS}
        for row in self.rows:
            for label, n in row.totals().items():
                counts[label] = counts.get(label, 0) + n
        return counts

    def to_json(self) -> dict:
        return {
            "rows": [
                {
                    "agent_type": r.agent_type,
                    "llm_config": r.llm_config,
                    "labels": {str(k): v for k, v in sorted(r.labels.items())},
                    "totals": r.totals(),
                }
                for r in self.rows
            ],
            "totals": self.totals(),
        }


def summarize(events: Sequence[RunEvent], allow_partial: bool = False) -> SummaryTable:
    """One terminal label per (instance, prompt): the last evaluation event's
    label, or "error" when the prompt failed without one.

    Error events carrying payload severity "warning" do not mark a prompt.
    """
    if not allow_partial and not any(e.kind == "run-finished" for e in events):
        raise RunLogError("run log has no run-finished marker")
    instance_meta: dict[str, tuple[str, str]] = {}
    labels: dict[tuple[str, int], str] = {}
    seen: list[tuple[str, int]] = []
    for event in events:
        if event.kind == "run-started":
            instance_meta[event.payload["instance_id"]] = (
                event.payload["agent_type"],
                event.payload.get("llm_config", ""),
            )
        elif event.kind == "invoke":
            instance_meta[event.payload["child_instance"]] = (
                event.payload["child_type"],
                event.payload.get("llm_config", ""),
            )
        key = (event.instance_id, event.prompt_index)
        if event.instance_id is None or event.prompt_index is None:
            continue
        is_failure = event.kind == "error" and event.payload.get("severity", "error") == "error"
        if key not in seen and (event.kind in ("prompt-rendered", "evaluation") or is_failure):
            seen.append(key)
        if event.kind == "evaluation":
            labels[key] = event.payload["label"]
    rows: dict[tuple[str, str], SummaryRow] = {}
    for instance_id, prompt_index in seen:
        meta = instance_meta.get(instance_id, (instance_id, ""))
        row_key = meta
        if row_key not in rows:
            rows[row_key] = SummaryRow(agent_type=meta[0], llm_config=meta[1])
        rows[row_key].labels[prompt_index] = labels.get((instance_id, prompt_index), "error")
    table = SummaryTable(rows=[rows[k] for k in sorted(rows)])
    return table


def render_table(summary: SummaryTable, fmt: str = "text", binary_labels: bool = False) -> str:
    """Render deterministically ordered (agent type, then prompt index)."""

    def collapse(label: str) -> str:
        if binary_labels and label in ("unmatched", "error"):
            return "incorrect"
        return label

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["agent_type", "llm_config", "prompt_index", "label"])
        for row in summary.rows:
            for prompt_index in sorted(row.labels):
                writer.writerow(
                    [row.agent_type, row.llm_config, prompt_index, collapse(row.labels[prompt_index])]
                )
        return buf.getvalue()
    if fmt == "structured":
        return json.dumps(summary.to_json(), indent=2, ensure_ascii=False) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown format '{fmt}'")
    lines = []
    header = f"{'agent type':<28} {'llm config':<16} {'prompt':>6}  label"
    lines.append(header)
    lines.append("-" * len(header))
    for row in summary.rows:
        for prompt_index in sorted(row.labels):
            lines.append(
                f"{row.agent_type:<28} {row.llm_config:<16} {prompt_index:>6}  "
                f"{collapse(row.labels[prompt_index])}"
            )
        totals = row.totals()
        shown = {k: v for k, v in totals.items() if v}
        total_text = ", ".join(f"{v} {collapse(k)}" for k, v in shown.items()) or "empty"
        lines.append(f"{row.agent_type:<28} {row.llm_config:<16} {'total':>6}  {total_text}")
    return "\n".join(lines) + "\n"


_TIMESTAMP_RE = re.compile(r'"timestamp": "[^"]*"')
_DURATION_RE = re.compile(r'"duration_ms": \d+')


def mask_temporal_fields(log_text: str) -> str:
    """Blank wall-clock-dependent fields (timestamps, durations) so two runs
    of the same seeded schedule compare byte-equal."""
    masked = _TIMESTAMP_RE.sub('"timestamp": "<masked>"', log_text)
    return _DURATION_RE.sub('"duration_ms": 0', masked)
