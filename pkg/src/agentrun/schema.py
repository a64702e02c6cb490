"""Agent schema: data model, concrete JSON syntax, validation, serialization.

The concrete syntax is a UTF-8 JSON document (conventional extension
``.agents.json``) whose top level is a list. List items are agent types by
default; functions, agent configs, and LLM configs appear as sibling objects
discriminated by a ``"kind"`` field::

    [ { "id": "My-Agent", "prompts": [ ... ], ... },
      { "kind": "function", "id": "my-check", ... },
      { "kind": "agent-config", "id": "my-run", ... },
      { "kind": "llm-config", "id": "local", ... } ]

Published schema excerpts abbreviate repeated elements with a bare ``...``
token; the parser accepts and discards such elision markers so excerpted
documents load as-is. Key names are hyphenated ("prompt-template",
"result-classes", "eval-expected", "agent-of-type", "prompt-id",
"data-keys", "expected-value").

Unknown fields are preserved opaquely (and re-emitted on serialization);
validation reports them as warnings rather than rejecting the document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .errors import SchemaError, TemplateError
from .sandbox import SandboxPolicy

# Function ids the runtime provides without a declaration. The per-language
# variants exist because action lists name them directly.
BUILTIN_FUNCTION_IDS = frozenset(
    {
        "write-to-file",
        "copy-file",
        "verify-file",
        "extract-code",
        "evaluate-syntax-shell",
        "evaluate-syntax-python",
        "execute-shell",
        "execute-python",
        "extract-ip-scan-results",
    }
)

# Builtins that judge a result rather than act on the host.
EVALUATION_BUILTIN_IDS = frozenset(
    {"verify-file", "evaluate-syntax-shell", "evaluate-syntax-python"}
)

PROVIDERS = ("openai-compatible", "local-runtime", "replay")


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultClass:
    """One named pattern bucket with its expected/unexpected labels."""

    class_id: str
    pattern: str
    eval_expected: str = "correct"
    eval_unexpected: str = "incorrect"
    pattern_type: str = "literal"  # "literal" (substring) or "regex" (anchored)
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EvaluationSpec:
    result_classes: tuple[ResultClass, ...] = ()
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ActionRef:
    """Either an unconditional function reference or a conditional case map.

    A conditional ref maps result-class ids to the function list that runs
    when the response was classified into that class.
    """

    function_id: str | None = None
    branches: dict[str, tuple[str, ...]] | None = None

    @property
    def is_conditional(self) -> bool:
        return self.branches is not None

    def __post_init__(self):
        if (self.function_id is None) == (self.branches is None):
            raise ValueError("ActionRef is either a function id or a case map")


@dataclass(frozen=True)
class InvokeSpec:
    agent_of_type: str
    prompt_id: int | None = None
    data_keys: tuple[str, ...] | None = None  # None = field absent
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PromptSpec:
    index: int  # 1-based ordinal within the owning agent type
    prompt: str
    answers: dict[str, str] | None = None
    answer: str | None = None
    actions: tuple[ActionRef, ...] | None = None  # None = inherit type default
    expected_value: str | None = None
    evaluate: EvaluationSpec | None = None
    invoke: InvokeSpec | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AgentType:
    id: str
    prompts: tuple[PromptSpec, ...] = ()
    system_prompt: str | None = None
    prompt_template: str | None = None
    default_actions: tuple[ActionRef, ...] = ()
    evaluate: EvaluationSpec | None = None
    data: dict[str, str] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FunctionDef:
    id: str
    kind: str = "execution"  # "execution" | "evaluation"
    builtin: str | None = None
    command: str | None = None
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    params: dict[str, str] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AgentConfig:
    id: str
    agent_type: str
    llm_config: str
    data_overrides: dict[str, str] = field(default_factory=dict)
    function_params: dict[str, dict[str, str]] = field(default_factory=dict)
    sandbox: SandboxPolicy | None = None
    continue_on_error: bool = False
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LlmConfig:
    id: str
    provider: str = "replay"
    endpoint: str = ""
    model: str = ""
    temperature: float = 0.0
    max_tokens: int = 1024
    api_key_env: str = ""
    extra_params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AgentSchema:
    agent_types: tuple[AgentType, ...] = ()
    functions: tuple[FunctionDef, ...] = ()
    agent_configs: tuple[AgentConfig, ...] = ()
    llm_configs: tuple[LlmConfig, ...] = ()

    def find_type(self, type_id: str) -> AgentType | None:
        return next((t for t in self.agent_types if t.id == type_id), None)

    def find_function(self, fn_id: str) -> FunctionDef | None:
        return next((f for f in self.functions if f.id == fn_id), None)

    def find_config(self, config_id: str) -> AgentConfig | None:
        return next((c for c in self.agent_configs if c.id == config_id), None)

    def find_llm_config(self, llm_id: str) -> LlmConfig | None:
        return next((c for c in self.llm_configs if c.id == llm_id), None)

    def config_for_type(self, type_id: str) -> AgentConfig | None:
        return next((c for c in self.agent_configs if c.agent_type == type_id), None)

    def function_kind(self, fn_id: str) -> str | None:
        """Resolve a function id (declared or builtin) to execution/evaluation."""
        fn = self.find_function(fn_id)
        if fn is not None:
            return fn.kind
        if fn_id in BUILTIN_FUNCTION_IDS:
            return "evaluation" if fn_id in EVALUATION_BUILTIN_IDS else "execution"
        return None


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _blank_elisions(text: str) -> str:
    """Blank out ``...`` elision markers (and one adjacent comma) outside strings.

    Characters are replaced with spaces so error line/column positions in the
    cleaned text match the original document.
    """
    out = list(text)
    in_string = False
    escaped = False
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == '"':
                in_string = False
            i += 1
            continue
        if c == '"':
            in_string = True
            i += 1
            continue
        if c == "." and text.startswith("...", i):
            for j in range(i, i + 3):
                out[j] = " "
            # prefer removing the comma before the marker; otherwise the one after
            k = i - 1
            while k >= 0 and out[k] in " \t\r\n":
                k -= 1
            if k >= 0 and out[k] == ",":
                out[k] = " "
            else:
                k = i + 3
                while k < n and text[k] in " \t\r\n":
                    k += 1
                if k < n and text[k] == ",":
                    out[k] = " "
            i += 3
            continue
        i += 1
    return "".join(out)


def _expect(value: Any, typ: type, path: str, what: str) -> Any:
    if not isinstance(value, typ):
        raise SchemaError(f"{what} must be {typ.__name__}, got {type(value).__name__}", path)
    return value


def _str_map(value: Any, path: str, what: str) -> dict[str, str]:
    _expect(value, dict, path, what)
    for k, v in value.items():
        if not isinstance(v, str):
            raise SchemaError(f"{what} values must be strings", f"{path}.{k}")
    return dict(value)


def _parse_actions(value: Any, path: str) -> tuple[ActionRef, ...]:
    _expect(value, list, path, "actions")
    refs = []
    for i, entry in enumerate(value):
        where = f"{path}[{i}]"
        if isinstance(entry, str):
            refs.append(ActionRef(function_id=entry))
        elif isinstance(entry, dict):
            branches = {}
            for class_id, fns in entry.items():
                _expect(fns, list, f"{where}.{class_id}", "case branch")
                for fn in fns:
                    _expect(fn, str, f"{where}.{class_id}", "case branch entry")
                branches[class_id] = tuple(fns)
            refs.append(ActionRef(branches=branches))
        else:
            raise SchemaError("action must be a function id or a case map", where)
    return tuple(refs)


def _parse_evaluate(obj: Any, path: str) -> EvaluationSpec:
    _expect(obj, dict, path, "evaluate")
    known = {"result-classes"}
    classes = []
    raw_classes = obj.get("result-classes", [])
    _expect(raw_classes, list, f"{path}.result-classes", "result-classes")
    for i, rc in enumerate(raw_classes):
        where = f"{path}.result-classes[{i}]"
        _expect(rc, dict, where, "result class")
        rc_known = {"class", "pattern", "pattern-type", "eval-expected", "eval-unexpected"}
        classes.append(
            ResultClass(
                class_id=_expect(rc.get("class", ""), str, where, "class"),
                pattern=_expect(rc.get("pattern", ""), str, where, "pattern"),
                eval_expected=_expect(rc.get("eval-expected", "correct"), str, where, "eval-expected"),
                eval_unexpected=_expect(rc.get("eval-unexpected", "incorrect"), str, where, "eval-unexpected"),
                pattern_type=_expect(rc.get("pattern-type", "literal"), str, where, "pattern-type"),
                extra={k: v for k, v in rc.items() if k not in rc_known},
            )
        )
    return EvaluationSpec(
        result_classes=tuple(classes),
        extra={k: v for k, v in obj.items() if k not in known},
    )


def _parse_invoke(obj: Any, path: str) -> InvokeSpec:
    _expect(obj, dict, path, "invoke")
    known = {"agent-of-type", "prompt-id", "data-keys"}
    prompt_id = obj.get("prompt-id")
    if prompt_id is not None and (isinstance(prompt_id, bool) or not isinstance(prompt_id, int)):
        raise SchemaError("prompt-id must be an integer", f"{path}.prompt-id")
    data_keys = obj.get("data-keys")
    if data_keys is not None:
        _expect(data_keys, list, f"{path}.data-keys", "data-keys")
        for k in data_keys:
            _expect(k, str, f"{path}.data-keys", "data key")
        data_keys = tuple(data_keys)
    return InvokeSpec(
        agent_of_type=_expect(obj.get("agent-of-type", ""), str, path, "agent-of-type"),
        prompt_id=prompt_id,
        data_keys=data_keys,
        extra={k: v for k, v in obj.items() if k not in known},
    )


def _parse_prompt(obj: Any, index: int, path: str) -> PromptSpec:
    _expect(obj, dict, path, "prompt entry")
    known = {"prompt", "answers", "answer", "actions", "expected-value", "evaluate", "invoke"}
    answers = obj.get("answers")
    if answers is not None:
        answers = _str_map(answers, f"{path}.answers", "answers")
    actions = obj.get("actions")
    if actions is not None:
        actions = _parse_actions(actions, f"{path}.actions")
    evaluate = obj.get("evaluate")
    if evaluate is not None:
        evaluate = _parse_evaluate(evaluate, f"{path}.evaluate")
    invoke = obj.get("invoke")
    if invoke is not None:
        invoke = _parse_invoke(invoke, f"{path}.invoke")
    answer = obj.get("answer")
    if answer is not None:
        _expect(answer, str, f"{path}.answer", "answer")
    expected = obj.get("expected-value")
    if expected is not None:
        _expect(expected, str, f"{path}.expected-value", "expected-value")
    return PromptSpec(
        index=index,
        prompt=_expect(obj.get("prompt", ""), str, f"{path}.prompt", "prompt"),
        answers=answers,
        answer=answer,
        actions=actions,
        expected_value=expected,
        evaluate=evaluate,
        invoke=invoke,
        extra={k: v for k, v in obj.items() if k not in known},
    )


def _parse_agent_type(obj: dict, path: str) -> AgentType:
    known = {"kind", "id", "system-prompt", "prompts", "prompt-template", "actions", "evaluate", "data"}
    type_id = _expect(obj.get("id", ""), str, f"{path}.id", "id")
    raw_prompts = obj.get("prompts", [])
    _expect(raw_prompts, list, f"{path}.prompts", "prompts")
    prompts = tuple(
        _parse_prompt(p, i + 1, f"{path}.prompts[{i}]") for i, p in enumerate(raw_prompts)
    )
    system_prompt = obj.get("system-prompt")
    if system_prompt is not None:
        _expect(system_prompt, str, f"{path}.system-prompt", "system-prompt")
    template = obj.get("prompt-template")
    if template is not None:
        _expect(template, str, f"{path}.prompt-template", "prompt-template")
    actions = obj.get("actions")
    default_actions = _parse_actions(actions, f"{path}.actions") if actions is not None else ()
    evaluate = obj.get("evaluate")
    if evaluate is not None:
        evaluate = _parse_evaluate(evaluate, f"{path}.evaluate")
    data = _str_map(obj.get("data", {}), f"{path}.data", "data")
    return AgentType(
        id=type_id,
        prompts=prompts,
        system_prompt=system_prompt,
        prompt_template=template,
        default_actions=default_actions,
        evaluate=evaluate,
        data=data,
        extra={k: v for k, v in obj.items() if k not in known},
    )


def _parse_function(obj: dict, path: str) -> FunctionDef:
    known = {"kind", "id", "function-kind", "builtin", "command", "inputs", "outputs", "params"}
    inputs = obj.get("inputs", [])
    outputs = obj.get("outputs", [])
    _expect(inputs, list, f"{path}.inputs", "inputs")
    _expect(outputs, list, f"{path}.outputs", "outputs")
    return FunctionDef(
        id=_expect(obj.get("id", ""), str, f"{path}.id", "id"),
        kind=_expect(obj.get("function-kind", "execution"), str, f"{path}.function-kind", "function-kind"),
        builtin=obj.get("builtin"),
        command=obj.get("command"),
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        params=_str_map(obj.get("params", {}), f"{path}.params", "params"),
        extra={k: v for k, v in obj.items() if k not in known},
    )


def _parse_agent_config(obj: dict, path: str) -> AgentConfig:
    known = {
        "kind",
        "id",
        "agent-type",
        "llm-config",
        "data",
        "function-params",
        "sandbox",
        "continue-on-error",
    }
    fn_params: dict[str, dict[str, str]] = {}
    raw_fn_params = obj.get("function-params", {})
    _expect(raw_fn_params, dict, f"{path}.function-params", "function-params")
    for fn_id, params in raw_fn_params.items():
        fn_params[fn_id] = _str_map(params, f"{path}.function-params.{fn_id}", "function params")
    sandbox = obj.get("sandbox")
    if sandbox is not None:
        _expect(sandbox, dict, f"{path}.sandbox", "sandbox")
        sandbox = SandboxPolicy.from_json(sandbox)
    return AgentConfig(
        id=_expect(obj.get("id", ""), str, f"{path}.id", "id"),
        agent_type=_expect(obj.get("agent-type", ""), str, f"{path}.agent-type", "agent-type"),
        llm_config=_expect(obj.get("llm-config", ""), str, f"{path}.llm-config", "llm-config"),
        data_overrides=_str_map(obj.get("data", {}), f"{path}.data", "data"),
        function_params=fn_params,
        sandbox=sandbox,
        continue_on_error=bool(obj.get("continue-on-error", False)),
        extra={k: v for k, v in obj.items() if k not in known},
    )


def _parse_llm_config(obj: dict, path: str) -> LlmConfig:
    known = {
        "kind",
        "id",
        "provider",
        "endpoint",
        "model",
        "temperature",
        "max-tokens",
        "api-key-env",
        "extra-params",
    }
    temperature = obj.get("temperature", 0.0)
    if isinstance(temperature, bool) or not isinstance(temperature, (int, float)):
        raise SchemaError("temperature must be a number", f"{path}.temperature")
    max_tokens = obj.get("max-tokens", 1024)
    if isinstance(max_tokens, bool) or not isinstance(max_tokens, int):
        raise SchemaError("max-tokens must be an integer", f"{path}.max-tokens")
    extra_params = obj.get("extra-params", {})
    _expect(extra_params, dict, f"{path}.extra-params", "extra-params")
    return LlmConfig(
        id=_expect(obj.get("id", ""), str, f"{path}.id", "id"),
        provider=_expect(obj.get("provider", "replay"), str, f"{path}.provider", "provider"),
        endpoint=_expect(obj.get("endpoint", ""), str, f"{path}.endpoint", "endpoint"),
        model=_expect(obj.get("model", ""), str, f"{path}.model", "model"),
        temperature=float(temperature),
        max_tokens=max_tokens,
        api_key_env=_expect(obj.get("api-key-env", ""), str, f"{path}.api-key-env", "api-key-env"),
        extra_params=dict(extra_params),
        extra={k: v for k, v in obj.items() if k not in known},
    )


def _check_unique(ids: list[str], what: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise SchemaError(f"duplicate identifier '{i}'", what)
        seen.add(i)


def parse_schema(text: str) -> AgentSchema:
    """Parse a schema document into an AgentSchema.

    Raises SchemaError with a position for syntax errors (line/column),
    duplicate identifiers, and type mismatches.
    """
    cleaned = _blank_elisions(text)
    try:
        doc = json.loads(cleaned)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"syntax error: {exc.msg}", f"line {exc.lineno}, column {exc.colno}") from exc
    _expect(doc, list, "$", "document")
    agent_types: list[AgentType] = []
    functions: list[FunctionDef] = []
    agent_configs: list[AgentConfig] = []
    llm_configs: list[LlmConfig] = []
    for i, item in enumerate(doc):
        path = f"$[{i}]"
        _expect(item, dict, path, "document entry")
        kind = item.get("kind", "agent-type")
        if kind == "agent-type":
            agent_types.append(_parse_agent_type(item, path))
        elif kind == "function":
            functions.append(_parse_function(item, path))
        elif kind == "agent-config":
            agent_configs.append(_parse_agent_config(item, path))
        elif kind == "llm-config":
            llm_configs.append(_parse_llm_config(item, path))
        else:
            raise SchemaError(f"unknown document entry kind '{kind}'", path)
    _check_unique([t.id for t in agent_types], "agent types")
    _check_unique([f.id for f in functions], "functions")
    _check_unique([c.id for c in agent_configs], "agent configs")
    _check_unique([c.id for c in llm_configs], "llm configs")
    return AgentSchema(
        agent_types=tuple(agent_types),
        functions=tuple(functions),
        agent_configs=tuple(agent_configs),
        llm_configs=tuple(llm_configs),
    )


def load_schema(path: str) -> AgentSchema:
    with open(path, encoding="utf-8") as fh:
        return parse_schema(fh.read())


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _actions_json(actions: tuple[ActionRef, ...]) -> list:
    out: list = []
    for ref in actions:
        if ref.is_conditional:
            out.append({cls: list(fns) for cls, fns in (ref.branches or {}).items()})
        else:
            out.append(ref.function_id)
    return out


def _evaluate_json(spec: EvaluationSpec) -> dict:
    classes = []
    for rc in spec.result_classes:
        obj = {
            "class": rc.class_id,
            "pattern": rc.pattern,
            "eval-expected": rc.eval_expected,
            "eval-unexpected": rc.eval_unexpected,
        }
        if rc.pattern_type != "literal":
            obj["pattern-type"] = rc.pattern_type
        obj.update(rc.extra)
        classes.append(obj)
    out = {"result-classes": classes}
    out.update(spec.extra)
    return out


def _prompt_json(p: PromptSpec) -> dict:
    obj: dict = {"prompt": p.prompt}
    if p.answers is not None:
        obj["answers"] = dict(p.answers)
    if p.answer is not None:
        obj["answer"] = p.answer
    if p.actions is not None:
        obj["actions"] = _actions_json(p.actions)
    if p.expected_value is not None:
        obj["expected-value"] = p.expected_value
    if p.evaluate is not None:
        obj["evaluate"] = _evaluate_json(p.evaluate)
    if p.invoke is not None:
        inv: dict = {"agent-of-type": p.invoke.agent_of_type}
        if p.invoke.prompt_id is not None:
            inv["prompt-id"] = p.invoke.prompt_id
        if p.invoke.data_keys is not None:
            inv["data-keys"] = list(p.invoke.data_keys)
        inv.update(p.invoke.extra)
        obj["invoke"] = inv
    obj.update(p.extra)
    return obj


def schema_to_json(schema: AgentSchema) -> list:
    """Project the schema back onto the concrete document structure."""
    doc: list = []
    for t in schema.agent_types:
        obj: dict = {"id": t.id}
        if t.system_prompt is not None:
            obj["system-prompt"] = t.system_prompt
        obj["prompts"] = [_prompt_json(p) for p in t.prompts]
        if t.prompt_template is not None:
            obj["prompt-template"] = t.prompt_template
        if t.default_actions:
            obj["actions"] = _actions_json(t.default_actions)
        if t.evaluate is not None:
            obj["evaluate"] = _evaluate_json(t.evaluate)
        if t.data:
            obj["data"] = dict(t.data)
        obj.update(t.extra)
        doc.append(obj)
    for f in schema.functions:
        obj = {"kind": "function", "id": f.id, "function-kind": f.kind}
        if f.builtin is not None:
            obj["builtin"] = f.builtin
        if f.command is not None:
            obj["command"] = f.command
        if f.inputs:
            obj["inputs"] = list(f.inputs)
        if f.outputs:
            obj["outputs"] = list(f.outputs)
        if f.params:
            obj["params"] = dict(f.params)
        obj.update(f.extra)
        doc.append(obj)
    for c in schema.agent_configs:
        obj = {
            "kind": "agent-config",
            "id": c.id,
            "agent-type": c.agent_type,
            "llm-config": c.llm_config,
        }
        if c.data_overrides:
            obj["data"] = dict(c.data_overrides)
        if c.function_params:
            obj["function-params"] = {k: dict(v) for k, v in c.function_params.items()}
        if c.sandbox is not None:
            obj["sandbox"] = c.sandbox.to_json()
        if c.continue_on_error:
            obj["continue-on-error"] = True
        obj.update(c.extra)
        doc.append(obj)
    for l in schema.llm_configs:
        obj = {
            "kind": "llm-config",
            "id": l.id,
            "provider": l.provider,
            "endpoint": l.endpoint,
            "model": l.model,
            "temperature": l.temperature,
            "max-tokens": l.max_tokens,
        }
        if l.api_key_env:
            obj["api-key-env"] = l.api_key_env
        if l.extra_params:
            obj["extra-params"] = dict(l.extra_params)
        obj.update(l.extra)
        doc.append(obj)
    return doc


def serialize_schema(schema: AgentSchema) -> str:
    """Emit concrete syntax; parse(serialize(s)) is structurally equal to s."""
    return json.dumps(schema_to_json(schema), indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    where: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.message} [{self.code}] (at {self.where})"


@dataclass
class ValidationReport:
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    @property
    def warnings(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "warning"]

    def ok(self) -> bool:
        return not self.errors


# Prompt field names reachable from templates (besides the "question" alias).
_PROMPT_FIELDS = ("prompt", "answers", "answer", "expected-value")


def _static_keys_for_type(schema: AgentSchema, agent_type: AgentType) -> set[str]:
    keys = set(agent_type.data)
    for config in schema.agent_configs:
        if config.agent_type == agent_type.id:
            keys.update(config.data_overrides)
    return keys


def _placeholder_resolvable(path: str, prompt: PromptSpec, data_keys: set[str]) -> bool:
    if path == "question":
        return True
    head, _, rest = path.partition("/")
    if head == "prompt" and not rest:
        return True
    if head == "answers" and rest and prompt.answers is not None and rest in prompt.answers:
        return True
    if head == "answer" and not rest and prompt.answer is not None:
        return True
    if head == "expected-value" and not rest and prompt.expected_value is not None:
        return True
    return path in data_keys


def validate_schema(schema: AgentSchema) -> ValidationReport:
    """Cross-reference and shape checks; diagnostics are data, not failures."""
    from .templating import extract_placeholders

    report = ValidationReport()

    def error(code: str, message: str, where: str) -> None:
        report.diagnostics.append(Diagnostic("error", code, message, where))

    def warning(code: str, message: str, where: str) -> None:
        report.diagnostics.append(Diagnostic("warning", code, message, where))

    declared_fns = {f.id for f in schema.functions}
    known_fns = declared_fns | BUILTIN_FUNCTION_IDS
    type_ids = {t.id for t in schema.agent_types}
    llm_ids = {l.id for l in schema.llm_configs}

    def check_actions(
        actions: tuple[ActionRef, ...], evaluate: EvaluationSpec | None, where: str
    ) -> None:
        declared_classes = (
            {rc.class_id for rc in evaluate.result_classes} if evaluate is not None else set()
        )
        for i, ref in enumerate(actions):
            at = f"{where}[{i}]"
            if ref.is_conditional:
                for class_id, fns in (ref.branches or {}).items():
                    if class_id not in declared_classes:
                        error(
                            "undeclared-result-class",
                            f"case branch names undeclared result class '{class_id}'",
                            at,
                        )
                    for fn in fns:
                        if fn not in known_fns:
                            error("unresolved-function", f"unresolved function id '{fn}'", at)
                        elif schema.function_kind(fn) == "execution":
                            error(
                                "case-gates-execution",
                                f"case branch references execution function '{fn}'; "
                                "classification runs after execution actions, so case "
                                "statements may only gate evaluation functions",
                                at,
                            )
            else:
                fn = ref.function_id or ""
                if fn not in known_fns:
                    error("unresolved-function", f"unresolved function id '{fn}'", at)

    for t in schema.agent_types:
        where = f"agent-type '{t.id}'"
        if not t.prompts:
            error("empty-prompts", "agent type declares no prompts", where)
        check_actions(t.default_actions, t.evaluate, f"{where}.actions")
        if t.evaluate is not None:
            _check_evaluate(t.evaluate, f"{where}.evaluate", error)
        static_keys = _static_keys_for_type(schema, t)
        for p in t.prompts:
            pwhere = f"{where}.prompts[{p.index}]"
            governing = p.evaluate if p.evaluate is not None else t.evaluate
            if p.actions is not None:
                check_actions(p.actions, governing, f"{pwhere}.actions")
            if p.evaluate is not None:
                _check_evaluate(p.evaluate, f"{pwhere}.evaluate", error)
            if p.answer is not None and (p.answers is None or p.answer not in p.answers):
                error("answer-not-in-answers", f"answer '{p.answer}' not among answers", pwhere)
            if p.expected_value is not None and p.expected_value == "":
                error("empty-expected-value", "expected-value must be non-empty", pwhere)
            if p.invoke is not None:
                inv = p.invoke
                target = schema.find_type(inv.agent_of_type)
                if target is None:
                    error(
                        "unresolved-agent-of-type",
                        f"unresolved agent-of-type '{inv.agent_of_type}'",
                        f"{pwhere}.invoke",
                    )
                elif inv.prompt_id is not None and not (1 <= inv.prompt_id <= len(target.prompts)):
                    error(
                        "prompt-id-out-of-range",
                        f"prompt-id {inv.prompt_id} outside 1..{len(target.prompts)}",
                        f"{pwhere}.invoke",
                    )
                if inv.data_keys is not None and not inv.data_keys:
                    error("empty-data-keys", "data-keys must be non-empty when present", f"{pwhere}.invoke")
            template = t.prompt_template if t.prompt_template is not None else p.prompt
            try:
                for path in extract_placeholders(template):
                    if not _placeholder_resolvable(path, p, static_keys):
                        warning(
                            "placeholder-unresolved-static",
                            f"placeholder [{path}] resolves to no prompt field, data key, "
                            "or reserved alias (may be provided at run-time)",
                            pwhere,
                        )
            except TemplateError as exc:
                error("template-syntax", str(exc), pwhere)
            if p.extra:
                warning("unknown-field", f"unknown fields {sorted(p.extra)}", pwhere)
        if t.extra:
            warning("unknown-field", f"unknown fields {sorted(t.extra)}", where)

    for f in schema.functions:
        where = f"function '{f.id}'"
        if (f.builtin is None) == (f.command is None):
            error("builtin-xor-command", "exactly one of builtin/command must be set", where)
        if f.builtin is not None and f.builtin not in BUILTIN_FUNCTION_IDS:
            error("unknown-builtin", f"unknown builtin '{f.builtin}'", where)
        if f.kind not in ("execution", "evaluation"):
            error("bad-function-kind", f"function-kind must be execution or evaluation, got '{f.kind}'", where)
        if f.builtin is not None and f.builtin in BUILTIN_FUNCTION_IDS:
            builtin_kind = "evaluation" if f.builtin in EVALUATION_BUILTIN_IDS else "execution"
            if f.kind != builtin_kind:
                error(
                    "builtin-kind-mismatch",
                    f"builtin '{f.builtin}' is an {builtin_kind} function, declared {f.kind}",
                    where,
                )
        if f.extra:
            warning("unknown-field", f"unknown fields {sorted(f.extra)}", where)

    for c in schema.agent_configs:
        where = f"agent-config '{c.id}'"
        if c.agent_type not in type_ids:
            error("unresolved-agent-type", f"unresolved agent-type '{c.agent_type}'", where)
        if c.llm_config not in llm_ids:
            error("unresolved-llm-config", f"unresolved llm-config '{c.llm_config}'", where)
        for fn_id in c.function_params:
            if fn_id not in known_fns and fn_id != "check-expected-value":
                warning("unknown-function-params", f"function-params for unknown function '{fn_id}'", where)
        if c.extra:
            warning("unknown-field", f"unknown fields {sorted(c.extra)}", where)

    for l in schema.llm_configs:
        where = f"llm-config '{l.id}'"
        if l.provider not in PROVIDERS:
            error("unknown-provider", f"unknown provider '{l.provider}'", where)
        if l.provider != "replay" and not l.endpoint:
            error("missing-endpoint", "endpoint required for non-replay providers", where)
        if l.temperature < 0:
            error("bad-temperature", "temperature must be >= 0", where)
        if l.max_tokens < 1:
            error("bad-max-tokens", "max-tokens must be positive", where)
        if l.extra:
            warning("unknown-field", f"unknown fields {sorted(l.extra)}", where)

    return report


def _check_evaluate(spec: EvaluationSpec, where: str, error) -> None:
    seen = set()
    for rc in spec.result_classes:
        if rc.class_id in seen:
            error("duplicate-result-class", f"duplicate result class '{rc.class_id}'", where)
        seen.add(rc.class_id)
        if not rc.pattern:
            error("empty-pattern", f"result class '{rc.class_id}' has an empty pattern", where)
        if rc.eval_expected == rc.eval_unexpected:
            error(
                "labels-identical",
                f"result class '{rc.class_id}' has identical expected/unexpected labels",
                where,
            )
        if rc.pattern_type not in ("literal", "regex"):
            error("bad-pattern-type", "pattern-type must be literal or regex", where)
