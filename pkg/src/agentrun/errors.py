"""Exception types shared across the package."""

from __future__ import annotations


class AgentRunError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(AgentRunError):
    """Schema document rejected: syntax error, duplicate id, or type mismatch.

    ``position`` is "line L, column C" for syntax errors and a document
    path (e.g. ``agent-types[0].prompts``) for structural errors.
    """

    def __init__(self, message: str, position: str = ""):
        self.position = position
        super().__init__(f"{message} (at {position})" if position else message)


class TemplateError(AgentRunError):
    """Malformed placeholder syntax in a template; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (offset {offset})")


class RenderError(AgentRunError):
    """A placeholder could not be resolved; carries the placeholder path."""

    def __init__(self, path: str):
        self.path = path
        super().__init__(f"unresolved placeholder [{path}]")


class ProviderError(AgentRunError):
    """LLM provider transport, protocol, or authentication failure."""


class ReplayMissError(ProviderError):
    """No fixture recorded for this request; carries the canonical hash."""

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no fixture for request {key}")


class SandboxDenied(AgentRunError):
    """A host action violated the sandbox policy (path escape, denied approval)."""


class FunctionError(AgentRunError):
    """An execution or evaluation function failed outright (distinct from an
    'incorrect' evaluation: missing inputs, absent checker binary, bad params)."""


class EngineError(AgentRunError):
    """Engine misuse or unrunnable state (unknown config, stepping a finished run)."""


class RunLogError(AgentRunError):
    """Run log integrity violation: out-of-order seq or corrupt record."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"{message} (line {line})" if line is not None else message)
