"""Built-in execution and evaluation functions plus response post-processing.

Execution functions act on the host (write files, run generated code) and
write data keys; evaluation functions judge a result and produce a label.
All host access goes through the sandbox policy.
"""

from __future__ import annotations

import hashlib
import os
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FunctionError
from .sandbox import SandboxPolicy, contain_path, data_env, run_sandboxed
from .schema import (
    BUILTIN_FUNCTION_IDS,
    EVALUATION_BUILTIN_IDS,
    EvaluationSpec,
    FunctionDef,
    PromptSpec,
)
from .templating import substitute_data

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"

DEFAULT_RESULT_KEY = "scan-result"


@dataclass
class FunctionOutcome:
    """Record of one function execution."""

    function_id: str
    exit_status: int | None = None
    stdout: str = ""
    stderr: str = ""
    written_keys: list[str] = field(default_factory=list)
    duration_ms: int = 0
    details: str = ""
    timed_out: bool = False

    def to_json(self) -> dict:
        return {
            "function_id": self.function_id,
            "exit_status": self.exit_status,
            "stdout": self.stdout,
            "stderr": self.stderr,
            "written_keys": list(self.written_keys),
            "duration_ms": self.duration_ms,
            "details": self.details,
            "timed_out": self.timed_out,
        }


@dataclass
class EvaluationResult:
    """Judgment of one result against its criteria."""

    label: str
    matched_class: str | None = None
    expected_class: str | None = None
    expected_value_hit: bool | None = None
    details: str = ""
    source: str = ""  # which check produced this (function id, "result-classes", ...)
    instance_id: str | None = None
    prompt_index: int | None = None

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "matched_class": self.matched_class,
            "expected_class": self.expected_class,
            "expected_value_hit": self.expected_value_hit,
            "details": self.details,
            "source": self.source,
            "instance_id": self.instance_id,
            "prompt_index": self.prompt_index,
        }


# ---------------------------------------------------------------------------
# Response post-processing and classification
# ---------------------------------------------------------------------------


def strip_reasoning(response: str) -> tuple[str, str | None]:
    """Split a response into (final text, reasoning segment).

    Removes the first well-formed <think>...</think> span. An unclosed open
    tag makes the entire response the reasoning segment and the final text
    empty; callers should surface a warning for that case.
    """
    start = response.find(THINK_OPEN)
    if start == -1:
        return response, None
    end = response.find(THINK_CLOSE, start + len(THINK_OPEN))
    if end == -1:
        return "", response
    reasoning = response[start + len(THINK_OPEN) : end]
    final = response[:start] + response[end + len(THINK_CLOSE) :]
    return final.strip(), reasoning


def classify_response(
    final: str, spec: EvaluationSpec, expected_class: str | None = None
) -> EvaluationResult:
    """Assign the first result class (declaration order) whose pattern matches.

    Literal patterns are case-sensitive substring matches; regex patterns are
    anchored (must match the whole final text). The label is the matched
    class's eval-expected string iff that class is the expected one; with no
    expected class every match is labeled with its eval-expected string. No
    match yields the distinct label "unmatched".
    """
    for rc in spec.result_classes:
        if rc.pattern_type == "regex":
            hit = re.fullmatch(rc.pattern, final, re.DOTALL) is not None
        else:
            hit = rc.pattern in final
        if hit:
            if expected_class is None or rc.class_id == expected_class:
                label = rc.eval_expected
            else:
                label = rc.eval_unexpected
            return EvaluationResult(
                label=label,
                matched_class=rc.class_id,
                expected_class=expected_class,
                details=f"matched pattern of class '{rc.class_id}'",
                source="result-classes",
            )
    return EvaluationResult(
        label="unmatched",
        matched_class=None,
        expected_class=expected_class,
        details="no result class pattern matched",
        source="result-classes",
    )


def check_expected_value(
    prompt: PromptSpec, data: dict[str, str], result_key: str = DEFAULT_RESULT_KEY
) -> EvaluationResult:
    """Judge whether the designated result key contains the expected value."""
    expected = prompt.expected_value or ""
    if result_key not in data:
        return EvaluationResult(
            label="incorrect",
            expected_value_hit=False,
            details=f"result key missing: '{result_key}'",
            source="expected-value",
        )
    hit = expected in data[result_key]
    return EvaluationResult(
        label="correct" if hit else "incorrect",
        expected_value_hit=hit,
        details=f"expected value {'found' if hit else 'not found'} in '{result_key}'",
        source="expected-value",
    )


# ---------------------------------------------------------------------------
# Builtins
# ---------------------------------------------------------------------------


@dataclass
class FunctionContext:
    """Everything a function sees: the response, the data store, its params,
    the sandbox, and a per-prompt directory for temp scripts."""

    function_id: str
    response: str
    data: dict[str, str]
    params: dict[str, str]
    policy: SandboxPolicy
    run_dir: Path  # workspace_root/.run/<instance>/<prompt>/

    def param(self, name: str, default: str | None = None) -> str | None:
        return self.params.get(name, default)


def _atomic_write(path: Path, content: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.parent.mkdir(parents=True, exist_ok=True)
    tmp.write_bytes(content)
    os.replace(tmp, path)


def _rel(policy: SandboxPolicy, path: Path) -> str:
    try:
        return str(path.relative_to(policy.root()))
    except ValueError:
        return str(path)


def builtin_write_to_file(ctx: FunctionContext) -> FunctionOutcome:
    """Write the response (or a data key) to the file named by a data key."""
    start = time.monotonic()
    source_key = ctx.param("source-key")
    if source_key is not None:
        if source_key not in ctx.data:
            raise FunctionError(f"source key missing: '{source_key}'")
        content = ctx.data[source_key]
    else:
        content = ctx.response
    target_key = ctx.param("target-key", "report-file") or "report-file"
    if target_key not in ctx.data:
        raise FunctionError(f"file-name key missing: '{target_key}'")
    path = contain_path(ctx.policy, ctx.data[target_key])
    payload = content.encode("utf-8")
    _atomic_write(path, payload)
    return FunctionOutcome(
        function_id=ctx.function_id,
        exit_status=0,
        details=f"wrote {len(payload)} bytes to {_rel(ctx.policy, path)}",
        duration_ms=int((time.monotonic() - start) * 1000),
    )


def builtin_copy_file(ctx: FunctionContext) -> FunctionOutcome:
    start = time.monotonic()
    src_key = ctx.param("src-key", "src-file") or "src-file"
    dst_key = ctx.param("dst-key", "dst-file") or "dst-file"
    for key in (src_key, dst_key):
        if key not in ctx.data:
            raise FunctionError(f"path key missing: '{key}'")
    src = contain_path(ctx.policy, ctx.data[src_key])
    dst = contain_path(ctx.policy, ctx.data[dst_key])
    if not src.is_file():
        raise FunctionError(f"source file missing: {_rel(ctx.policy, src)}")
    _atomic_write(dst, src.read_bytes())
    return FunctionOutcome(
        function_id=ctx.function_id,
        exit_status=0,
        details=f"copied {_rel(ctx.policy, src)} -> {_rel(ctx.policy, dst)}",
        duration_ms=int((time.monotonic() - start) * 1000),
    )


def builtin_verify_file(ctx: FunctionContext) -> tuple[FunctionOutcome, EvaluationResult]:
    """Label "correct" iff the file's sha256 equals the expected hex digest."""
    start = time.monotonic()
    path_key = ctx.param("path-key", "report-file") or "report-file"
    expected = ctx.param("expected-digest")
    if expected is None:
        digest_key = ctx.param("digest-key", "expected-digest") or "expected-digest"
        expected = ctx.data.get(digest_key)
    if not expected:
        raise FunctionError("no expected digest configured (expected-digest)")
    if path_key not in ctx.data:
        raise FunctionError(f"path key missing: '{path_key}'")
    path = contain_path(ctx.policy, ctx.data[path_key])
    outcome = FunctionOutcome(function_id=ctx.function_id, exit_status=0)
    if not path.is_file():
        result = EvaluationResult(
            label="incorrect",
            details=f"file missing: {_rel(ctx.policy, path)}",
            source=ctx.function_id,
        )
    else:
        actual = hashlib.sha256(path.read_bytes()).hexdigest()
        match = actual == expected.lower()
        result = EvaluationResult(
            label="correct" if match else "incorrect",
            details=f"sha256 {actual} vs expected {expected.lower()}",
            source=ctx.function_id,
        )
    outcome.duration_ms = int((time.monotonic() - start) * 1000)
    outcome.details = result.details
    return outcome, result


_FENCE_RE = re.compile(r"^```([A-Za-z0-9_+\-]*)[ \t]*\r?\n(.*?)^```[ \t]*$", re.M | re.S)


def builtin_extract_code(ctx: FunctionContext) -> FunctionOutcome:
    """Concatenate fenced code blocks (optionally filtered by language tag)
    into the target data key."""
    start = time.monotonic()
    language = ctx.param("language")
    target_key = ctx.param("target-key", "code") or "code"
    blocks = [
        body for tag, body in _FENCE_RE.findall(ctx.response) if not language or tag == language
    ]
    details = f"extracted {len(blocks)} block(s)"
    if blocks:
        code = "\n".join(b.rstrip("\n") for b in blocks) + "\n"
    elif (ctx.param("fallback") or "").lower() in ("response", "true"):
        code = ctx.response
        details = "no fenced blocks; fell back to whole response"
    else:
        code = ""
        details = "warning: no fenced code blocks found"
    ctx.data[target_key] = code
    return FunctionOutcome(
        function_id=ctx.function_id,
        exit_status=0,
        written_keys=[target_key],
        details=details,
        duration_ms=int((time.monotonic() - start) * 1000),
    )


_PY_SYNTAX_CHECK = "import sys; compile(open(sys.argv[1]).read(), sys.argv[1], 'exec')"


def _write_script(ctx: FunctionContext, suffix: str) -> Path:
    code_key = ctx.param("code-key", "code") or "code"
    if code_key not in ctx.data:
        raise FunctionError(f"code key missing: '{code_key}'")
    ctx.run_dir.mkdir(parents=True, exist_ok=True)
    script = ctx.run_dir / f"{ctx.function_id}{suffix}"
    script.write_text(ctx.data[code_key], encoding="utf-8")
    return script


def builtin_evaluate_syntax(
    ctx: FunctionContext, language: str
) -> tuple[FunctionOutcome, EvaluationResult]:
    """Run the language's no-execute syntax check; "correct" on exit 0."""
    suffix = ".sh" if language == "shell" else ".py"
    script = _write_script(ctx, suffix)
    if language == "shell":
        argv = ["sh", "-n", str(script)]
    else:
        argv = [sys.executable, "-c", _PY_SYNTAX_CHECK, str(script)]
    proc = run_sandboxed(ctx.policy, argv, cwd=ctx.policy.root())
    ok = proc.exit_status == 0
    outcome = FunctionOutcome(
        function_id=ctx.function_id,
        exit_status=proc.exit_status,
        stdout=proc.stdout,
        stderr=proc.stderr,
        duration_ms=proc.duration_ms,
        timed_out=proc.timed_out,
        details="syntax ok" if ok else "syntax check failed",
    )
    result = EvaluationResult(
        label="correct" if ok else "incorrect",
        details="syntax ok" if ok else proc.stderr.strip() or "syntax check failed",
        source=ctx.function_id,
    )
    return outcome, result


def builtin_execute(ctx: FunctionContext, language: str) -> FunctionOutcome:
    """Execute the code key in the sandbox; stdout/stderr/exit land in data."""
    suffix = ".sh" if language == "shell" else ".py"
    script = _write_script(ctx, suffix)
    interpreter = ["sh", str(script)] if language == "shell" else [sys.executable, str(script)]
    proc = run_sandboxed(
        ctx.policy, interpreter, extra_env=data_env(ctx.data), cwd=ctx.policy.root()
    )
    ctx.data["exec-stdout"] = proc.stdout
    ctx.data["exec-stderr"] = proc.stderr
    ctx.data["exec-exit-code"] = "" if proc.exit_status is None else str(proc.exit_status)
    details = f"exit {proc.exit_status}"
    if proc.timed_out:
        details = f"timeout after {ctx.policy.timeout}s"
    return FunctionOutcome(
        function_id=ctx.function_id,
        exit_status=proc.exit_status,
        stdout=proc.stdout,
        stderr=proc.stderr,
        written_keys=["exec-stdout", "exec-stderr", "exec-exit-code"],
        duration_ms=proc.duration_ms,
        timed_out=proc.timed_out,
        details=details,
    )


_IPV4_CANDIDATE_RE = re.compile(r"(?<![\d.])(\d{1,3}(?:\.\d{1,3}){3})(?![\d.])")


def is_valid_ipv4(token: str) -> bool:
    parts = token.split(".")
    return len(parts) == 4 and all(p.isdigit() and 0 <= int(p) <= 255 for p in parts)


def builtin_extract_ip_scan_results(ctx: FunctionContext) -> FunctionOutcome:
    """Collect valid IPv4 addresses from the source key, deduplicated in
    order of first appearance, newline-joined into the target key."""
    start = time.monotonic()
    source_key = ctx.param("source-key", "exec-stdout") or "exec-stdout"
    target_key = ctx.param("target-key", DEFAULT_RESULT_KEY) or DEFAULT_RESULT_KEY
    if source_key not in ctx.data:
        raise FunctionError(f"source key missing: '{source_key}'")
    seen: list[str] = []
    for m in _IPV4_CANDIDATE_RE.finditer(ctx.data[source_key]):
        addr = m.group(1)
        if is_valid_ipv4(addr) and addr not in seen:
            seen.append(addr)
    ctx.data[target_key] = "\n".join(seen)
    return FunctionOutcome(
        function_id=ctx.function_id,
        exit_status=0,
        written_keys=[target_key],
        details=f"extracted {len(seen)} address(es)",
        duration_ms=int((time.monotonic() - start) * 1000),
    )


def run_command_function(
    ctx: FunctionContext, fn: FunctionDef
) -> tuple[FunctionOutcome, EvaluationResult | None]:
    """Run a user-defined command under the sandbox.

    Placeholders in the command are substituted from the data store; data
    keys are additionally exposed as DATA_<KEY> environment variables. The
    first declared output key receives the command's stdout (sans trailing
    newline). Evaluation-kind commands label "correct" iff exit 0.
    """
    command = substitute_data(fn.command or "", ctx.data)
    proc = run_sandboxed(
        ctx.policy, ["sh", "-c", command], extra_env=data_env(ctx.data), cwd=ctx.policy.root()
    )
    written: list[str] = []
    if fn.outputs and not proc.timed_out:
        ctx.data[fn.outputs[0]] = proc.stdout.rstrip("\n")
        written.append(fn.outputs[0])
    outcome = FunctionOutcome(
        function_id=ctx.function_id,
        exit_status=proc.exit_status,
        stdout=proc.stdout,
        stderr=proc.stderr,
        written_keys=written,
        duration_ms=proc.duration_ms,
        timed_out=proc.timed_out,
        details=f"exit {proc.exit_status}" if not proc.timed_out else "timeout",
    )
    result = None
    if fn.kind == "evaluation":
        ok = proc.exit_status == 0
        result = EvaluationResult(
            label="correct" if ok else "incorrect",
            details=proc.stdout.strip() or proc.stderr.strip() or outcome.details,
            source=ctx.function_id,
        )
    return outcome, result


_BUILTINS = {
    "write-to-file": lambda ctx: (builtin_write_to_file(ctx), None),
    "copy-file": lambda ctx: (builtin_copy_file(ctx), None),
    "verify-file": builtin_verify_file,
    "extract-code": lambda ctx: (builtin_extract_code(ctx), None),
    "evaluate-syntax-shell": lambda ctx: builtin_evaluate_syntax(ctx, "shell"),
    "evaluate-syntax-python": lambda ctx: builtin_evaluate_syntax(ctx, "python"),
    "execute-shell": lambda ctx: (builtin_execute(ctx, "shell"), None),
    "execute-python": lambda ctx: (builtin_execute(ctx, "python"), None),
    "extract-ip-scan-results": lambda ctx: (builtin_extract_ip_scan_results(ctx), None),
}

# registry and DSL vocabulary must not drift apart
assert set(_BUILTINS) == set(BUILTIN_FUNCTION_IDS)
assert EVALUATION_BUILTIN_IDS <= set(_BUILTINS)


def run_builtin(ctx: FunctionContext, builtin: str) -> tuple[FunctionOutcome, EvaluationResult | None]:
    """Dispatch a builtin id; returns its outcome and, for evaluation-kind
    builtins, the evaluation result."""
    if builtin not in _BUILTINS:
        raise FunctionError(f"unknown builtin '{builtin}'")
    return _BUILTINS[builtin](ctx)
