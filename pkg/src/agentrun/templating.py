"""Prompt template rendering: bracketed placeholders over prompt fields and data.

Placeholder grammar: ``[`` identifier (``/`` identifier)* ``]`` where an
identifier is one or more of ``A-Z a-z 0-9 & _ -``. A literal ``[`` is
escaped as ``[[``. Resolution order, first hit wins:

  1. the reserved alias ``question`` -> the prompt's own "prompt" field text
  2. prompt fields by name with path descent (``answers/A``)
  3. agent data store keys (full path joined with ``/``), which includes any
     keys copied in by an invocation

Values are substituted verbatim; placeholders inside substituted values are
never re-expanded.
"""

from __future__ import annotations

import re
from typing import Mapping

from .errors import RenderError, TemplateError
from .schema import PromptSpec

_PATH_RE = re.compile(r"[A-Za-z0-9&_\-]+(?:/[A-Za-z0-9&_\-]+)*")


def _scan(template: str):
    """Yield ("text", literal) and ("placeholder", path, offset) tokens."""
    i = 0
    n = len(template)
    literal_start = i
    while i < n:
        c = template[i]
        if c != "[":
            i += 1
            continue
        if template.startswith("[[", i):
            yield ("text", template[literal_start:i] + "[")
            i += 2
            literal_start = i
            continue
        m = _PATH_RE.match(template, i + 1)
        if m is None or m.end() >= n or template[m.end()] != "]":
            raise TemplateError("unbalanced or malformed placeholder", i)
        yield ("text", template[literal_start:i])
        yield ("placeholder", m.group(0), i)
        i = m.end() + 1
        literal_start = i
    yield ("text", template[literal_start:])


def extract_placeholders(template: str) -> list[str]:
    """Every placeholder path in order of appearance, duplicates preserved."""
    return [tok[1] for tok in _scan(template) if tok[0] == "placeholder"]


def _descend(value, segments: list[str]) -> str | None:
    for seg in segments:
        if not isinstance(value, Mapping) or seg not in value:
            return None
        value = value[seg]
    return value if isinstance(value, str) else None


def resolve_placeholder(path: str, prompt: PromptSpec | None, data: Mapping[str, str]) -> str | None:
    if prompt is not None:
        if path == "question":
            return prompt.prompt
        head, _, rest = path.partition("/")
        fields = {
            "prompt": prompt.prompt,
            "answers": prompt.answers,
            "answer": prompt.answer,
            "expected-value": prompt.expected_value,
        }
        if head in fields and fields[head] is not None:
            hit = _descend(fields[head], rest.split("/") if rest else [])
            if hit is not None:
                return hit
    value = data.get(path)
    return value if isinstance(value, str) else None


def render_template(template: str, prompt: PromptSpec | None, data: Mapping[str, str]) -> str:
    """Substitute every placeholder; unresolved paths raise RenderError."""
    parts: list[str] = []
    for tok in _scan(template):
        if tok[0] == "text":
            parts.append(tok[1])
        else:
            value = resolve_placeholder(tok[1], prompt, data)
            if value is None:
                raise RenderError(tok[1])
            parts.append(value)
    return "".join(parts)


def substitute_data(template: str, data: Mapping[str, str]) -> str:
    """Render a template against a bare data mapping (no prompt fields)."""
    return render_template(template, None, data)
