"""Stack-based agent execution: instantiate agents, drive prompt cycles,
handle invocation of child agents, and emit an ordered event stream.

One prompt cycle = render the top prompt, send the conversation to the
instance's LLM provider, strip reasoning segments, run the resolved action
list, evaluate (result classes, expected value, evaluation functions),
handle invocation, and pop completed prompts/agents. Agents and their
pending prompts live on two LIFO stacks; a child agent pushed by an invoke
completes before its parent executes another prompt.
"""

from __future__ import annotations

import datetime as _dt
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .errors import (
    AgentRunError,
    EngineError,
    FunctionError,
    ProviderError,
    RenderError,
    ReplayMissError,
    SandboxDenied,
    TemplateError,
)
from .functions import (
    EvaluationResult,
    FunctionContext,
    check_expected_value,
    classify_response,
    run_builtin,
    run_command_function,
    strip_reasoning,
)
from .runlog import RunEvent
from .sandbox import SandboxPolicy
from .schema import (
    ActionRef,
    AgentConfig,
    AgentSchema,
    AgentType,
    LlmConfig,
    PromptSpec,
    validate_schema,
)
from .templating import render_template

DEFAULT_RESULT_KEY = "scan-result"

Observer = Callable[[RunEvent], None]
# Blocks until the pending approval is resolved; returns True to approve.
Approver = Callable[[RunEvent], bool]


@dataclass
class Message:
    role: str  # system | user | assistant | action-output
    content: str
    origin: str  # template | llm | function:<id> | invocation
    raw_content: str | None = None


@dataclass
class AgentInstance:
    instance_id: str
    type_id: str
    data: dict[str, str]
    conversation: list[Message] = field(default_factory=list)
    llm_config: LlmConfig | None = None
    function_params: dict[str, dict[str, str]] = field(default_factory=dict)
    parent: str | None = None
    last_eval_label: str | None = None


@dataclass
class ExecutionState:
    schema: AgentSchema
    providers: dict
    policy: SandboxPolicy
    root_config: AgentConfig
    agent_stack: list[str] = field(default_factory=list)
    prompt_stack: list[tuple[str, int]] = field(default_factory=list)
    instances: dict[str, AgentInstance] = field(default_factory=dict)
    event_seq: int = 0
    status: str = "ready"  # ready | awaiting-llm | awaiting-approval | done | aborted
    rng: random.Random = field(default_factory=random.Random)
    observers: list[Observer] = field(default_factory=list)
    record: list[RunEvent] = field(default_factory=list)
    approver: Approver | None = None
    approve_all: bool = False
    provider_override: str | None = None
    continue_on_error: bool = False
    abort_requested: bool = False

    def emit(
        self,
        kind: str,
        instance_id: str | None = None,
        prompt_index: int | None = None,
        payload: dict | None = None,
    ) -> RunEvent:
        self.event_seq += 1
        event = RunEvent(
            seq=self.event_seq,
            timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(),
            kind=kind,
            instance_id=instance_id,
            prompt_index=prompt_index,
            payload=payload or {},
        )
        self.record.append(event)
        for observer in self.observers:
            observer(event)
        return event


@dataclass
class RunRecord:
    events: list[RunEvent]
    status: str


class _PromptFailure(AgentRunError):
    """Internal: a prompt cycle failed with a coded, loggable cause."""

    def __init__(self, code: str, message: str, force_abort: bool = False):
        self.code = code
        self.force_abort = force_abort
        super().__init__(message)


_DEFAULT_REPLAY = LlmConfig(id="default-replay", provider="replay", model="replay")


def _default_llm_config(schema: AgentSchema) -> LlmConfig:
    for config in schema.llm_configs:
        if config.provider == "replay":
            return config
    return _DEFAULT_REPLAY


def instantiate_agent(
    schema: AgentSchema,
    config_or_type: str,
    extra_data: dict[str, str] | None = None,
    parent: AgentInstance | None = None,
    rng: random.Random | None = None,
) -> AgentInstance:
    """Create a runtime agent from an agent-config id or a bare type id.

    The data store merges type data, then config overrides, then extra_data
    (later wins). The conversation is seeded with the type's system prompt
    when present.
    """
    rng = rng or random.Random()
    config = schema.find_config(config_or_type)
    if config is not None:
        agent_type = schema.find_type(config.agent_type)
        if agent_type is None:
            raise EngineError(f"config '{config.id}' references unknown type '{config.agent_type}'")
        llm = schema.find_llm_config(config.llm_config) or _default_llm_config(schema)
    else:
        agent_type = schema.find_type(config_or_type)
        if agent_type is None:
            raise EngineError(f"unknown agent config or type '{config_or_type}'")
        llm = _default_llm_config(schema)
    data = dict(agent_type.data)
    if config is not None:
        data.update(config.data_overrides)
    if extra_data:
        data.update(extra_data)
    instance = AgentInstance(
        instance_id=f"ag-{rng.getrandbits(32):08x}",
        type_id=agent_type.id,
        data=data,
        llm_config=llm,
        function_params=dict(config.function_params) if config is not None else {},
        parent=parent.instance_id if parent is not None else None,
    )
    if agent_type.system_prompt:
        instance.conversation.append(
            Message(role="system", content=agent_type.system_prompt, origin="template")
        )
    return instance


def start_run(
    schema: AgentSchema,
    root_config: str,
    providers: dict,
    policy: SandboxPolicy,
    *,
    seed: int = 0,
    observers: Sequence[Observer] = (),
    approver: Approver | None = None,
    approve_all: bool = False,
    provider_override: str | None = None,
) -> ExecutionState:
    """Instantiate the root agent and push all of its prompts (prompt 1 on top)."""
    report = validate_schema(schema)
    if not report.ok():
        details = "; ".join(str(d) for d in report.errors)
        raise EngineError(f"schema has validation errors: {details}")
    root = policy.root()
    if not root.is_dir():
        raise EngineError(f"workspace root is not a directory: {root}")
    state = ExecutionState(
        schema=schema,
        providers=providers,
        policy=policy,
        root_config=_resolve_root_config(schema, root_config),
        rng=random.Random(seed),
        observers=list(observers),
        approver=approver,
        approve_all=approve_all,
        provider_override=provider_override,
    )
    state.continue_on_error = state.root_config.continue_on_error
    instance = instantiate_agent(schema, root_config, rng=state.rng)
    state.instances[instance.instance_id] = instance
    state.agent_stack.append(instance.instance_id)
    agent_type = schema.find_type(instance.type_id)
    indices = [p.index for p in agent_type.prompts]
    for index in reversed(indices):
        state.prompt_stack.append((instance.instance_id, index))
    provider_name = state.provider_override or instance.llm_config.provider
    if provider_name not in providers:
        raise EngineError(f"provider unavailable: '{provider_name}'")
    state.emit(
        "run-started",
        instance_id=instance.instance_id,
        payload={
            "instance_id": instance.instance_id,
            "agent_type": instance.type_id,
            "llm_config": instance.llm_config.id,
            "prompt_indices": indices,
            "config_id": state.root_config.id,
            "seed": seed,
        },
    )
    return state


def _resolve_root_config(schema: AgentSchema, config_or_type: str) -> AgentConfig:
    config = schema.find_config(config_or_type)
    if config is not None:
        return config
    agent_type = schema.find_type(config_or_type)
    if agent_type is None:
        raise EngineError(f"unknown agent config or type '{config_or_type}'")
    return AgentConfig(
        id=f"default:{agent_type.id}",
        agent_type=agent_type.id,
        llm_config=_default_llm_config(schema).id,
    )


def select_actions(
    agent_type: AgentType, prompt: PromptSpec, matched_class: str | None = None
) -> list[str]:
    """Resolve the effective function list for a prompt.

    A prompt-level action list fully replaces the type's default list.
    Unconditional refs always contribute; a conditional ref contributes its
    branch only when matched_class equals the branch's class id. Declaration
    order is preserved.
    """
    refs = prompt.actions if prompt.actions is not None else agent_type.default_actions
    out: list[str] = []
    for ref in refs:
        if ref.is_conditional:
            if matched_class is not None and matched_class in (ref.branches or {}):
                out.extend(ref.branches[matched_class])
        else:
            out.append(ref.function_id)
    return out


def _conditional_followups(
    agent_type: AgentType, prompt: PromptSpec, matched_class: str | None
) -> list[str]:
    if matched_class is None:
        return []
    refs = prompt.actions if prompt.actions is not None else agent_type.default_actions
    out: list[str] = []
    for ref in refs:
        if ref.is_conditional and matched_class in (ref.branches or {}):
            out.extend(ref.branches[matched_class])
    return out


def _wrap_failure(exc: Exception) -> _PromptFailure:
    if isinstance(exc, _PromptFailure):
        return exc
    if isinstance(exc, RenderError):
        return _PromptFailure("unresolved-placeholder", str(exc))
    if isinstance(exc, TemplateError):
        return _PromptFailure("template-syntax", str(exc))
    if isinstance(exc, ReplayMissError):
        return _PromptFailure("replay-miss", str(exc))
    if isinstance(exc, ProviderError):
        return _PromptFailure("provider-failure", str(exc))
    if isinstance(exc, SandboxDenied):
        return _PromptFailure("sandbox-denial", str(exc))
    if isinstance(exc, FunctionError):
        return _PromptFailure("function-failure", str(exc))
    raise exc


class _Cycle:
    """Scratch state for one prompt cycle."""

    def __init__(self, state: ExecutionState, instance: AgentInstance, prompt: PromptSpec):
        self.state = state
        self.instance = instance
        self.prompt = prompt
        self.syntax_ok: dict[str, bool] = {}
        self.eval_count = 0
        self.final_text = ""

    def run_dir(self) -> Path:
        return (
            self.state.policy.root()
            / ".run"
            / self.instance.instance_id
            / str(self.prompt.index)
        )

    def emit_eval(self, result: EvaluationResult) -> None:
        stamped = EvaluationResult(
            label=result.label,
            matched_class=result.matched_class,
            expected_class=result.expected_class,
            expected_value_hit=result.expected_value_hit,
            details=result.details,
            source=result.source,
            instance_id=self.instance.instance_id,
            prompt_index=self.prompt.index,
        )
        self.state.emit(
            "evaluation",
            instance_id=self.instance.instance_id,
            prompt_index=self.prompt.index,
            payload=stamped.to_json(),
        )
        self.instance.last_eval_label = stamped.label
        self.eval_count += 1

    def function_context(self, function_id: str, params: dict[str, str]) -> FunctionContext:
        return FunctionContext(
            function_id=function_id,
            response=self.final_text,
            data=self.instance.data,
            params=params,
            policy=self.state.policy,
            run_dir=self.run_dir(),
        )

    def run_function(self, function_id: str) -> EvaluationResult | None:
        """Run one function (builtin or declared), emit its action-executed
        event, append its output to the conversation, and return the
        evaluation result for evaluation-kind functions."""
        state = self.state
        fn = state.schema.find_function(function_id)
        params: dict[str, str] = {}
        if fn is not None:
            params.update(fn.params)
        params.update(self.instance.function_params.get(function_id, {}))
        self._approval_gate(function_id, params)
        kind = state.schema.function_kind(function_id)
        if kind is None:
            raise _PromptFailure("function-failure", f"unresolved function id '{function_id}'")
        self._execute_gate(function_id, params)
        ctx = self.function_context(function_id, params)
        if fn is not None and fn.command is not None:
            outcome, result = run_command_function(ctx, fn)
        elif fn is not None and fn.builtin is not None:
            outcome, result = run_builtin(ctx, fn.builtin)
        else:
            outcome, result = run_builtin(ctx, function_id)
        if function_id.startswith("evaluate-syntax") or (
            fn is not None and fn.builtin is not None and fn.builtin.startswith("evaluate-syntax")
        ):
            code_key = params.get("code-key", "code")
            self.syntax_ok[code_key] = result is not None and result.label == "correct"
        state.emit(
            "action-executed",
            instance_id=self.instance.instance_id,
            prompt_index=self.prompt.index,
            payload={
                "function_id": function_id,
                "function_kind": kind,
                "outcome": outcome.to_json(),
            },
        )
        if outcome.stdout:
            self.instance.conversation.append(
                Message(
                    role="action-output",
                    content=outcome.stdout,
                    origin=f"function:{function_id}",
                )
            )
        return result

    def _approval_gate(self, function_id: str, params: dict[str, str]) -> None:
        state = self.state
        if function_id not in state.policy.approval_required or state.approve_all:
            return
        preview = self.instance.data.get(params.get("code-key", "code"), "")
        request = state.emit(
            "approval-requested",
            instance_id=self.instance.instance_id,
            prompt_index=self.prompt.index,
            payload={"function_id": function_id, "preview": preview},
        )
        if state.approver is None:
            state.emit(
                "approval-resolved",
                instance_id=self.instance.instance_id,
                prompt_index=self.prompt.index,
                payload={"approved": False, "request_seq": request.seq, "reason": "no approver attached"},
            )
            raise _PromptFailure(
                "sandbox-denial",
                f"approval required for '{function_id}' but run is non-interactive",
                force_abort=True,
            )
        state.status = "awaiting-approval"
        try:
            approved = bool(state.approver(request))
        finally:
            state.status = "ready"
        state.emit(
            "approval-resolved",
            instance_id=self.instance.instance_id,
            prompt_index=self.prompt.index,
            payload={"approved": approved, "request_seq": request.seq},
        )
        if not approved:
            raise _PromptFailure(
                "sandbox-denial", f"approval denied for '{function_id}'", force_abort=True
            )

    def _execute_gate(self, function_id: str, params: dict[str, str]) -> None:
        """execute-* requires a passed syntax check for the same code key when
        the action list carries one (and it must have run already)."""
        if not function_id.startswith("execute-"):
            return
        code_key = params.get("code-key", "code")
        agent_type = self.state.schema.find_type(self.instance.type_id)
        listed = select_actions(agent_type, self.prompt, None)
        checks = [f for f in listed if f.startswith("evaluate-syntax")]
        if not checks:
            return
        ok = self.syntax_ok.get(code_key)
        if ok is None:
            raise _PromptFailure(
                "function-failure",
                f"'{function_id}' listed before its syntax evaluation for key '{code_key}'",
            )
        if not ok:
            raise _PromptFailure(
                "function-failure",
                f"syntax evaluation failed for key '{code_key}'; refusing to execute",
            )


def step(state: ExecutionState) -> list[RunEvent]:
    """Execute exactly one prompt cycle; returns the events it emitted."""
    if state.status in ("done", "aborted"):
        raise EngineError("run finished")
    if state.status != "ready":
        raise EngineError(f"step called while {state.status}")
    first_new = len(state.record)
    if state.abort_requested:
        _finish(state, "aborted")
        return state.record[first_new:]
    if not state.prompt_stack:
        _finish(state, "done")
        return state.record[first_new:]
    instance_id, prompt_index = state.prompt_stack[-1]
    instance = state.instances[instance_id]
    agent_type = state.schema.find_type(instance.type_id)
    prompt = agent_type.prompts[prompt_index - 1]
    cycle = _Cycle(state, instance, prompt)
    try:
        _run_cycle(state, cycle, agent_type)
    except (_PromptFailure, AgentRunError) as exc:
        failure = _wrap_failure(exc)
        state.emit(
            "error",
            instance_id=instance_id,
            prompt_index=prompt_index,
            payload={"code": failure.code, "message": str(failure), "severity": "error"},
        )
        _pop_prompt(state, instance_id, prompt_index)
        if failure.force_abort or not state.continue_on_error:
            _finish(state, "aborted")
            return state.record[first_new:]
        _pop_completed_agents(state)
        if not state.prompt_stack:
            _finish(state, "done")
        return state.record[first_new:]
    if state.abort_requested and state.status == "ready":
        _finish(state, "aborted")
    return state.record[first_new:]


def _run_cycle(state: ExecutionState, cycle: _Cycle, agent_type: AgentType) -> None:
    instance = cycle.instance
    prompt = cycle.prompt
    template = (
        agent_type.prompt_template if agent_type.prompt_template is not None else prompt.prompt
    )
    rendered = render_template(template, prompt, instance.data)
    instance.conversation.append(Message(role="user", content=rendered, origin="template"))
    state.emit(
        "prompt-rendered",
        instance_id=instance.instance_id,
        prompt_index=prompt.index,
        payload={"text": rendered},
    )

    provider_name = state.provider_override or instance.llm_config.provider
    provider = state.providers.get(provider_name)
    if provider is None:
        raise _PromptFailure("provider-failure", f"provider unavailable: '{provider_name}'")

    def sink(chunk: str) -> None:
        state.emit(
            "llm-chunk",
            instance_id=instance.instance_id,
            prompt_index=prompt.index,
            payload={"text": chunk},
        )

    state.status = "awaiting-llm"
    try:
        raw_text = provider.complete(instance.llm_config, instance.conversation, sink)
    finally:
        state.status = "ready"
    final, reasoning = strip_reasoning(raw_text)
    cycle.final_text = final
    state.emit(
        "llm-complete",
        instance_id=instance.instance_id,
        prompt_index=prompt.index,
        payload={"content": final, "reasoning": reasoning},
    )
    instance.conversation.append(
        Message(
            role="assistant",
            content=final,
            origin="llm",
            raw_content=raw_text if reasoning is not None else None,
        )
    )
    if reasoning is not None and not final:
        state.emit(
            "error",
            instance_id=instance.instance_id,
            prompt_index=prompt.index,
            payload={
                "code": "unclosed-think-tag",
                "message": "reasoning segment never closed; final text is empty",
                "severity": "warning",
            },
        )

    # action phase: unconditional functions in declaration order; evaluation
    # results from evaluation-kind functions are deferred to the eval phase
    pending_evals: list[EvaluationResult] = []
    for function_id in select_actions(agent_type, prompt, None):
        result = cycle.run_function(function_id)
        if result is not None:
            pending_evals.append(result)

    # evaluation phase
    for result in pending_evals:
        cycle.emit_eval(result)
    matched_class: str | None = None
    evaluate = prompt.evaluate if prompt.evaluate is not None else agent_type.evaluate
    if evaluate is not None and evaluate.result_classes:
        result = classify_response(cycle.final_text, evaluate, expected_class=prompt.answer)
        cycle.emit_eval(result)
        matched_class = result.matched_class
    for function_id in _conditional_followups(agent_type, prompt, matched_class):
        result = cycle.run_function(function_id)
        if result is not None:
            cycle.emit_eval(result)
    if prompt.expected_value is not None:
        result_key = instance.function_params.get("check-expected-value", {}).get(
            "result-key", DEFAULT_RESULT_KEY
        )
        cycle.emit_eval(check_expected_value(prompt, instance.data, result_key))
    if cycle.eval_count == 0:
        cycle.emit_eval(
            EvaluationResult(
                label="correct",
                details="completed without evaluation criteria",
                source="completion",
            )
        )

    _pop_prompt(state, instance.instance_id, prompt.index)
    if prompt.invoke is not None:
        handle_invoke(state, prompt.invoke, instance)
    _pop_completed_agents(state)
    if not state.prompt_stack and state.status == "ready":
        _finish(state, "done")


def handle_invoke(state: ExecutionState, invoke, parent: AgentInstance) -> AgentInstance:
    """Instantiate the invoked child, copy the listed data keys from the
    parent, and push the child plus its referenced prompt(s)."""
    child_type = state.schema.find_type(invoke.agent_of_type)
    if child_type is None:
        raise _PromptFailure(
            "function-failure", f"unresolved agent-of-type '{invoke.agent_of_type}'"
        )
    copied: dict[str, str] = {}
    for key in invoke.data_keys or ():
        if key not in parent.data:
            raise _PromptFailure(
                "missing-invocation-data", f"data key '{key}' missing from invoking agent"
            )
        copied[key] = parent.data[key]
    config = state.schema.config_for_type(child_type.id)
    config_or_type = config.id if config is not None else child_type.id
    child = instantiate_agent(state.schema, config_or_type, copied, parent, rng=state.rng)
    if config is None:
        # no dedicated config: the child runs against the parent's LLM
        child.llm_config = parent.llm_config
    state.instances[child.instance_id] = child
    state.agent_stack.append(child.instance_id)
    if invoke.prompt_id is not None:
        indices = [invoke.prompt_id]
    else:
        indices = [p.index for p in child_type.prompts]
    for index in reversed(indices):
        state.prompt_stack.append((child.instance_id, index))
    state.emit(
        "invoke",
        instance_id=parent.instance_id,
        payload={
            "parent_instance": parent.instance_id,
            "child_instance": child.instance_id,
            "child_type": child.type_id,
            "llm_config": child.llm_config.id,
            "prompt_indices": indices,
            "data_keys": sorted(copied),
        },
    )
    return child


def _pop_prompt(state: ExecutionState, instance_id: str, prompt_index: int) -> None:
    if state.prompt_stack and state.prompt_stack[-1] == (instance_id, prompt_index):
        state.prompt_stack.pop()


def _pop_completed_agents(state: ExecutionState) -> None:
    while state.agent_stack:
        top = state.agent_stack[-1]
        if any(inst == top for inst, _ in state.prompt_stack):
            break
        state.agent_stack.pop()
        instance = state.instances[top]
        state.emit(
            "agent-completed",
            instance_id=top,
            payload={"agent_type": instance.type_id, "last_label": instance.last_eval_label},
        )
        if instance.parent is not None:
            parent = state.instances[instance.parent]
            for key, value in instance.data.items():
                parent.data[f"{instance.type_id}/{key}"] = value
            parent.data[f"{instance.type_id}/eval"] = instance.last_eval_label or ""


def _finish(state: ExecutionState, status: str) -> None:
    state.status = status
    state.emit("run-finished", payload={"status": status})


def run_to_completion(state: ExecutionState) -> RunRecord:
    """Step until done or aborted; returns the complete ordered event log."""
    while state.status == "ready":
        step(state)
    return RunRecord(events=list(state.record), status=state.status)
