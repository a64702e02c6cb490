"""Sandbox policy and contained subprocess execution for host actions.

Every file path a builtin touches must resolve under the policy's workspace
root; every child process runs with a filtered environment, a wall-clock
timeout, and bounded captured output. This is operator-machine containment,
not VM isolation.
"""

from __future__ import annotations

import os
import signal
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FunctionError, SandboxDenied

DEFAULT_TIMEOUT = 60.0
DEFAULT_MAX_OUTPUT_BYTES = 1 << 20
DEFAULT_ENV_ALLOWLIST = ("PATH", "HOME", "LANG", "LC_ALL")
DEFAULT_APPROVAL_REQUIRED = ("execute-shell", "execute-python")

TRUNCATION_MARKER = "…[truncated]"

# Wall-clock slack granted to the kill/reap path beyond the configured timeout.
SUPERVISION_SLACK = 2.0


@dataclass
class SandboxPolicy:
    """Limits applied to all host-side function execution."""

    workspace_root: str | None = None
    timeout: float = DEFAULT_TIMEOUT
    max_output_bytes: int = DEFAULT_MAX_OUTPUT_BYTES
    env_allowlist: list[str] = field(default_factory=lambda: list(DEFAULT_ENV_ALLOWLIST))
    approval_required: set[str] = field(default_factory=lambda: set(DEFAULT_APPROVAL_REQUIRED))
    network_allowed: bool = True

    @classmethod
    def from_json(cls, obj: dict) -> "SandboxPolicy":
        policy = cls()
        if "workspace-root" in obj:
            policy.workspace_root = obj["workspace-root"]
        if "timeout" in obj:
            policy.timeout = float(obj["timeout"])
        if "max-output-bytes" in obj:
            policy.max_output_bytes = int(obj["max-output-bytes"])
        if "env-allowlist" in obj:
            policy.env_allowlist = list(obj["env-allowlist"])
        if "approval-required" in obj:
            policy.approval_required = set(obj["approval-required"])
        if "network-allowed" in obj:
            policy.network_allowed = bool(obj["network-allowed"])
        return policy

    def to_json(self) -> dict:
        return {
            "workspace-root": self.workspace_root,
            "timeout": self.timeout,
            "max-output-bytes": self.max_output_bytes,
            "env-allowlist": list(self.env_allowlist),
            "approval-required": sorted(self.approval_required),
            "network-allowed": self.network_allowed,
        }

    def root(self) -> Path:
        if not self.workspace_root:
            raise SandboxDenied("no workspace root configured")
        return Path(self.workspace_root).resolve()


def contain_path(policy: SandboxPolicy, candidate: str) -> Path:
    """Resolve ``candidate`` against the workspace root and refuse escapes.

    Symlinks and ".." segments are normalized before the containment check,
    so a link pointing outside the root is denied even though its textual
    path looks contained.
    """
    root = policy.root()
    raw = Path(candidate)
    path = raw if raw.is_absolute() else root / raw
    resolved = path.resolve()
    if not resolved.is_relative_to(root):
        raise SandboxDenied(f"path escapes workspace root: {candidate}")
    return resolved


@dataclass
class ProcessResult:
    exit_status: int | None
    stdout: str
    stderr: str
    timed_out: bool
    duration_ms: int


def _truncate(data: bytes, limit: int) -> str:
    if len(data) > limit:
        return data[:limit].decode("utf-8", errors="replace") + TRUNCATION_MARKER
    return data.decode("utf-8", errors="replace")


def run_sandboxed(
    policy: SandboxPolicy,
    argv: list[str],
    extra_env: dict[str, str] | None = None,
    cwd: str | Path | None = None,
) -> ProcessResult:
    """Run ``argv`` under the policy: filtered env, timeout, bounded output.

    The child gets its own session so the whole process group can be killed
    on timeout; orphaned grandchildren do not keep the call blocked.
    """
    env = {k: os.environ[k] for k in policy.env_allowlist if k in os.environ}
    if extra_env:
        env.update(extra_env)
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            argv,
            cwd=str(cwd) if cwd is not None else str(policy.root()),
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,
        )
    except FileNotFoundError as exc:
        raise FunctionError(f"executable not found: {argv[0]}") from exc
    timed_out = False
    try:
        out, err = proc.communicate(timeout=policy.timeout)
    except subprocess.TimeoutExpired:
        timed_out = True
        try:
            os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            proc.kill()
        out, err = proc.communicate()
    duration_ms = int((time.monotonic() - start) * 1000)
    return ProcessResult(
        exit_status=None if timed_out else proc.returncode,
        stdout=_truncate(out, policy.max_output_bytes),
        stderr=_truncate(err, policy.max_output_bytes),
        timed_out=timed_out,
        duration_ms=duration_ms,
    )


def data_env(data: dict[str, str]) -> dict[str, str]:
    """Expose agent data keys to child processes as DATA_<KEY> variables."""
    env = {}
    for key, value in data.items():
        name = "DATA_" + "".join(c if c.isalnum() else "_" for c in key.upper())
        env[name] = value
    return env
