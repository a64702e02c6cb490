"""Builtins, reasoning stripping, classification, and expected-value checks."""

from __future__ import annotations

import hashlib
import random
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))
from sha256_oracle import sha256_hex

from agentrun import (
    FunctionError,
    SandboxDenied,
    SandboxPolicy,
    check_expected_value,
    classify_response,
    strip_reasoning,
)
from agentrun.functions import (
    FunctionContext,
    builtin_copy_file,
    builtin_evaluate_syntax,
    builtin_execute,
    builtin_extract_code,
    builtin_extract_ip_scan_results,
    builtin_verify_file,
    builtin_write_to_file,
    is_valid_ipv4,
    run_command_function,
)
from agentrun.schema import EvaluationSpec, FunctionDef, PromptSpec, ResultClass


def make_ctx(workspace, response="", data=None, params=None, function_id="fn") -> FunctionContext:
    policy = SandboxPolicy(workspace_root=str(workspace), timeout=10.0)
    return FunctionContext(
        function_id=function_id,
        response=response,
        data=data if data is not None else {},
        params=params or {},
        policy=policy,
        run_dir=Path(workspace) / ".run" / "test" / "1",
    )


# --- strip_reasoning --------------------------------------------------------


def test_strip_reasoning_removes_think_span():
    final, reasoning = strip_reasoning("<think>chain of steps</think>ANSWER: B")
    assert final == "ANSWER: B"
    assert reasoning == "chain of steps"


def test_strip_reasoning_passthrough():
    assert strip_reasoning("ANSWER: B") == ("ANSWER: B", None)


def test_strip_reasoning_unclosed():
    final, reasoning = strip_reasoning("<think>never closed")
    assert final == ""
    assert reasoning == "<think>never closed"


def test_strip_reasoning_first_span_only():
    final, reasoning = strip_reasoning("<think>a</think>mid<think>b</think>")
    assert reasoning == "a"
    assert final == "mid<think>b</think>"


# --- classify_response ------------------------------------------------------


QA_SPEC = EvaluationSpec(
    result_classes=tuple(
        ResultClass(class_id=c, pattern=f"ANSWER: {c}") for c in ("A", "B", "C", "D")
    )
)


def test_classify_expected_match():
    result = classify_response("The correct option is B.\nANSWER: B", QA_SPEC, expected_class="B")
    assert result.matched_class == "B"
    assert result.label == "correct"


def test_classify_unexpected_match():
    result = classify_response("ANSWER: A", QA_SPEC, expected_class="B")
    assert result.matched_class == "A"
    assert result.label == "incorrect"


def test_classify_unmatched():
    result = classify_response("I am not sure.", QA_SPEC, expected_class="B")
    assert result.matched_class is None
    assert result.label == "unmatched"


def test_classify_first_match_in_declaration_order():
    both = "ANSWER: A and also ANSWER: B"
    result = classify_response(both, QA_SPEC, expected_class="B")
    assert result.matched_class == "A"


def test_classify_without_expected_uses_expected_label():
    result = classify_response("ANSWER: D", QA_SPEC)
    assert result.matched_class == "D"
    assert result.label == "correct"


def test_classify_regex_pattern_anchored():
    spec = EvaluationSpec(
        result_classes=(
            ResultClass(class_id="ip", pattern=r"IP: \d+\.\d+\.\d+\.\d+", pattern_type="regex"),
        )
    )
    assert classify_response("IP: 10.0.0.1", spec).matched_class == "ip"
    assert classify_response("prefix IP: 10.0.0.1", spec).matched_class is None


@settings(max_examples=60)
@given(st.text().filter(lambda s: all(f"ANSWER: {c}" not in s for c in "ABCD")))
def test_classify_suffix_invariance(suffix):
    base = "ANSWER: C"
    with_suffix = classify_response(base + suffix, QA_SPEC, expected_class="C")
    assert with_suffix.matched_class == "C"
    assert with_suffix.label == "correct"


# --- check_expected_value ---------------------------------------------------


def _prompt_with_expected(value: str) -> PromptSpec:
    return PromptSpec(index=1, prompt="p", expected_value=value)


def test_expected_value_hit():
    result = check_expected_value(
        _prompt_with_expected("10.11.1.24"), {"scan-result": "10.11.1.22\n10.11.1.24"}
    )
    assert result.expected_value_hit is True
    assert result.label == "correct"


def test_expected_value_miss():
    result = check_expected_value(_prompt_with_expected("10.11.1.24"), {"scan-result": "10.11.1.22"})
    assert result.expected_value_hit is False
    assert result.label == "incorrect"


def test_expected_value_missing_key():
    result = check_expected_value(_prompt_with_expected("10.11.1.24"), {})
    assert result.label == "incorrect"
    assert "result key missing" in result.details


# --- write-to-file ----------------------------------------------------------


def test_write_to_file_exact_bytes(workspace):
    ctx = make_ctx(
        workspace,
        response="scan script text",
        data={"report-file": "network-report.txt"},
        function_id="write-to-file",
    )
    outcome = builtin_write_to_file(ctx)
    assert (workspace / "network-report.txt").read_text() == "scan script text"
    assert "16 bytes" in outcome.details


def test_write_to_file_escape_denied(workspace):
    ctx = make_ctx(workspace, response="x", data={"report-file": "../../etc/passwd"})
    with pytest.raises(SandboxDenied):
        builtin_write_to_file(ctx)


def test_write_to_file_empty_response(workspace):
    ctx = make_ctx(workspace, response="", data={"report-file": "empty.txt"})
    builtin_write_to_file(ctx)
    assert (workspace / "empty.txt").read_bytes() == b""


def test_write_to_file_missing_name_key(workspace):
    with pytest.raises(FunctionError, match="file-name key"):
        builtin_write_to_file(make_ctx(workspace, response="x", data={}))


# --- copy-file / verify-file -------------------------------------------------


def test_copy_file_bytes_identical(workspace):
    (workspace / "a.bin").write_bytes(b"abc")
    ctx = make_ctx(workspace, data={"src-file": "a.bin", "dst-file": "b.bin"})
    builtin_copy_file(ctx)
    a = hashlib.sha256((workspace / "a.bin").read_bytes()).hexdigest()
    b = hashlib.sha256((workspace / "b.bin").read_bytes()).hexdigest()
    assert a == b


def test_copy_file_missing_src(workspace):
    ctx = make_ctx(workspace, data={"src-file": "nope.bin", "dst-file": "b.bin"})
    with pytest.raises(FunctionError, match="source file missing"):
        builtin_copy_file(ctx)


def test_copy_file_dst_outside_root_denied(workspace):
    (workspace / "a.bin").write_bytes(b"abc")
    ctx = make_ctx(workspace, data={"src-file": "a.bin", "dst-file": "/tmp/evil.bin"})
    with pytest.raises(SandboxDenied):
        builtin_copy_file(ctx)


EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
ABC_SHA256 = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_verify_file_empty_vector(workspace):
    (workspace / "f").write_bytes(b"")
    ctx = make_ctx(
        workspace,
        data={"report-file": "f"},
        params={"expected-digest": EMPTY_SHA256},
        function_id="verify-file",
    )
    _, result = builtin_verify_file(ctx)
    assert result.label == "correct"


def test_verify_file_abc_vector_case_insensitive(workspace):
    (workspace / "f").write_bytes(b"abc")
    ctx = make_ctx(workspace, data={"report-file": "f"}, params={"expected-digest": ABC_SHA256.upper()})
    _, result = builtin_verify_file(ctx)
    assert result.label == "correct"


def test_verify_file_mismatch(workspace):
    (workspace / "f").write_bytes(b"anything")
    ctx = make_ctx(workspace, data={"report-file": "f"}, params={"expected-digest": "00" * 32})
    _, result = builtin_verify_file(ctx)
    assert result.label == "incorrect"


def test_verify_file_missing_file(workspace):
    ctx = make_ctx(workspace, data={"report-file": "gone"}, params={"expected-digest": "00" * 32})
    _, result = builtin_verify_file(ctx)
    assert result.label == "incorrect"
    assert "missing" in result.details


def test_verify_file_agrees_with_independent_sha256(workspace):
    rng = random.Random(0xC0FFEE)
    for i in range(100):
        payload = rng.randbytes(rng.randint(0, 4096))
        (workspace / "blob").write_bytes(payload)
        ctx = make_ctx(
            workspace,
            data={"report-file": "blob"},
            params={"expected-digest": sha256_hex(payload)},
        )
        _, result = builtin_verify_file(ctx)
        assert result.label == "correct", f"disagreement on sample {i}"


# --- extract-code -----------------------------------------------------------


def test_extract_code_python_block(workspace):
    response = "Here is the script:\n\n```python\nimport nmap\nprint('scan')\n```\ndone"
    ctx = make_ctx(workspace, response=response, data={})
    outcome = builtin_extract_code(ctx)
    assert ctx.data["code"] == "import nmap\nprint('scan')\n"
    assert "1 block" in outcome.details


def test_extract_code_language_filter(workspace):
    response = "```python\npy\n```\nand\n```shell\necho hi\n```\n"
    ctx = make_ctx(workspace, response=response, data={}, params={"language": "shell"})
    builtin_extract_code(ctx)
    assert ctx.data["code"] == "echo hi\n"


def test_extract_code_no_fences_warns(workspace):
    ctx = make_ctx(workspace, response="bare text", data={})
    outcome = builtin_extract_code(ctx)
    assert ctx.data["code"] == ""
    assert "warning" in outcome.details


def test_extract_code_fallback_param(workspace):
    ctx = make_ctx(workspace, response="echo hi", data={}, params={"fallback": "response"})
    builtin_extract_code(ctx)
    assert ctx.data["code"] == "echo hi"


# --- evaluate-syntax ----------------------------------------------------------


def test_evaluate_syntax_shell_ok(workspace):
    ctx = make_ctx(workspace, data={"code": "echo hi\n"}, function_id="evaluate-syntax-shell")
    _, result = builtin_evaluate_syntax(ctx, "shell")
    assert result.label == "correct"


def test_evaluate_syntax_shell_broken(workspace):
    ctx = make_ctx(workspace, data={"code": "if [ missing-fi\n"}, function_id="evaluate-syntax-shell")
    _, result = builtin_evaluate_syntax(ctx, "shell")
    assert result.label == "incorrect"
    assert result.details  # parser message from the shell


def test_evaluate_syntax_python_broken(workspace):
    ctx = make_ctx(workspace, data={"code": "print(\n"}, function_id="evaluate-syntax-python")
    _, result = builtin_evaluate_syntax(ctx, "python")
    assert result.label == "incorrect"


def test_evaluate_syntax_missing_code_key(workspace):
    ctx = make_ctx(workspace, data={})
    with pytest.raises(FunctionError, match="code key"):
        builtin_evaluate_syntax(ctx, "shell")


# --- execute ------------------------------------------------------------------


def test_execute_shell_echo(workspace):
    ctx = make_ctx(workspace, data={"code": "echo hi\n"}, function_id="execute-shell")
    outcome = builtin_execute(ctx, "shell")
    assert outcome.exit_status == 0
    assert ctx.data["exec-stdout"] == "hi\n"
    assert ctx.data["exec-exit-code"] == "0"


def test_execute_timeout_flag(workspace):
    ctx = make_ctx(workspace, data={"code": "sleep 10\n"})
    ctx.policy.timeout = 0.5
    outcome = builtin_execute(ctx, "shell")
    assert outcome.timed_out is True
    assert outcome.exit_status is None


def test_execute_python_scan_stub(workspace):
    script = 'print("Host 10.11.1.24 is up")\nprint("Host 10.11.1.22 is up")\n'
    ctx = make_ctx(workspace, data={"code": script}, function_id="execute-python")
    outcome = builtin_execute(ctx, "python")
    assert outcome.exit_status == 0
    assert "10.11.1.24" in ctx.data["exec-stdout"]


# --- extract-ip-scan-results --------------------------------------------------


def test_extract_ip_basic(workspace):
    ctx = make_ctx(workspace, data={"exec-stdout": "Host 10.11.1.24 is up"})
    builtin_extract_ip_scan_results(ctx)
    assert ctx.data["scan-result"] == "10.11.1.24"


def test_extract_ip_none_found(workspace):
    ctx = make_ctx(workspace, data={"exec-stdout": "no addresses here"})
    builtin_extract_ip_scan_results(ctx)
    assert ctx.data["scan-result"] == ""


def test_extract_ip_octet_range_enforced(workspace):
    ctx = make_ctx(workspace, data={"exec-stdout": "999.1.1.1 and 10.1.1.5"})
    builtin_extract_ip_scan_results(ctx)
    assert ctx.data["scan-result"] == "10.1.1.5"


def test_extract_ip_dedupe_order(workspace):
    ctx = make_ctx(workspace, data={"exec-stdout": "10.0.0.2 10.0.0.1 10.0.0.2"})
    builtin_extract_ip_scan_results(ctx)
    assert ctx.data["scan-result"] == "10.0.0.2\n10.0.0.1"


def test_is_valid_ipv4_brute_force_octets():
    # octet validity over the full single-octet range, against int parsing
    for value in range(0, 300):
        token = f"{value}.1.1.1"
        assert is_valid_ipv4(token) == (0 <= value <= 255)
    assert not is_valid_ipv4("1.2.3")
    assert not is_valid_ipv4("1.2.3.4.5")


# --- user-defined command functions ------------------------------------------


def test_command_function_stdout_to_first_output(workspace):
    fn = FunctionDef(id="greet", kind="execution", command="echo hello [name]", outputs=("greeting",))
    ctx = make_ctx(workspace, data={"name": "world"}, function_id="greet")
    outcome, result = run_command_function(ctx, fn)
    assert outcome.exit_status == 0
    assert ctx.data["greeting"] == "hello world"
    assert result is None


def test_command_function_data_env(workspace):
    fn = FunctionDef(id="env-probe", kind="execution", command='printf "%s" "$DATA_SCAN_RESULT"', outputs=("probe",))
    ctx = make_ctx(workspace, data={"scan-result": "10.0.0.7"}, function_id="env-probe")
    run_command_function(ctx, fn)
    assert ctx.data["probe"] == "10.0.0.7"


def test_evaluation_command_labels_by_exit(workspace):
    ok = FunctionDef(id="ok", kind="evaluation", command="true")
    bad = FunctionDef(id="bad", kind="evaluation", command="false")
    _, ok_result = run_command_function(make_ctx(workspace, function_id="ok"), ok)
    _, bad_result = run_command_function(make_ctx(workspace, function_id="bad"), bad)
    assert ok_result.label == "correct"
    assert bad_result.label == "incorrect"
