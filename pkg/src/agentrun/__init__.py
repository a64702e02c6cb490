"""Schema-driven multi-agent LLM orchestration.

Agents are declared in a JSON schema (agent types, functions, agent configs,
LLM configs), executed by a stack-based engine against real or replayed chat
backends, with task actions running in a sandboxed host environment and
results judged into labeled classes.
"""

from .engine import (
    AgentInstance,
    ExecutionState,
    Message,
    RunRecord,
    handle_invoke,
    instantiate_agent,
    run_to_completion,
    select_actions,
    start_run,
    step,
)
from .errors import (
    AgentRunError,
    EngineError,
    FunctionError,
    ProviderError,
    RenderError,
    ReplayMissError,
    RunLogError,
    SandboxDenied,
    SchemaError,
    TemplateError,
)
from .functions import (
    EvaluationResult,
    FunctionOutcome,
    check_expected_value,
    classify_response,
    strip_reasoning,
)
from .providers import (
    ChatRequest,
    Fixture,
    FixtureRecorder,
    FixtureStore,
    LocalRuntimeProvider,
    OpenAiCompatProvider,
    ReplayProvider,
    ScriptedProvider,
    build_providers,
    canonicalize_request,
    request_key,
)
from .runlog import (
    LogWriter,
    RunEvent,
    SummaryTable,
    mask_temporal_fields,
    read_log,
    render_table,
    summarize,
)
from .sandbox import SandboxPolicy
from .schema import (
    AgentConfig,
    AgentSchema,
    AgentType,
    EvaluationSpec,
    FunctionDef,
    InvokeSpec,
    LlmConfig,
    PromptSpec,
    ResultClass,
    ValidationReport,
    load_schema,
    parse_schema,
    serialize_schema,
    validate_schema,
)
from .templating import extract_placeholders, render_template
from .trace import verify_stack_discipline

__version__ = "0.1.0"
