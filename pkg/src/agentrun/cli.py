"""Operator entry point: validate schemas, run agents, render reports, record
fixtures, and serve the event-stream/control API.

Exit status contract: 0 success, 1 run or validation failure, 2 usage/IO
failure.
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

from . import providers as providers_mod
from .engine import run_to_completion, start_run
from .errors import AgentRunError, RunLogError, SchemaError
from .runlog import LogWriter, read_log, render_table, summarize
from .sandbox import SandboxPolicy
from .schema import AgentSchema, load_schema, validate_schema
from .server import serve


def _load(path: str) -> AgentSchema:
    try:
        return load_schema(path)
    except OSError as exc:
        print(f"error: cannot read schema: {exc}", file=sys.stderr)
        raise SystemExit(2)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(1)


def cmd_validate(args: argparse.Namespace) -> int:
    schema = _load(args.schema)
    report = validate_schema(schema)
    for diag in report.diagnostics:
        print(str(diag), file=sys.stderr)
    if report.ok():
        print(
            f"ok: {len(schema.agent_types)} agent type(s), "
            f"{len(report.warnings)} warning(s)",
            file=sys.stderr,
        )
        return 0
    return 1


def _resolve_root(schema: AgentSchema, config_arg: str | None) -> str:
    if config_arg:
        return config_arg
    if schema.agent_configs:
        return schema.agent_configs[0].id
    if schema.agent_types:
        return schema.agent_types[0].id
    raise AgentRunError("schema declares no agent types")


def _build_policy(schema: AgentSchema, root: str, workspace: str | None) -> SandboxPolicy:
    config = schema.find_config(root)
    policy = config.sandbox if config is not None and config.sandbox is not None else SandboxPolicy()
    if workspace:
        policy.workspace_root = workspace
    if policy.workspace_root is None:
        policy.workspace_root = tempfile.mkdtemp(prefix="agentrun-ws-")
    Path(policy.workspace_root).mkdir(parents=True, exist_ok=True)
    return policy


def make_state_factory(schema: AgentSchema, args: argparse.Namespace):
    """Shared run assembly for cmd_run and cmd_serve."""
    registry = providers_mod.build_providers(args.fixtures)
    if getattr(args, "record", None):
        store = registry["replay"].store
        for name in ("openai-compatible", "local-runtime"):
            registry[name] = providers_mod.FixtureRecorder(registry[name], store, args.record)

    def factory(root_config: str | None = None, seed: int | None = None, observers=(), approver=None):
        root = _resolve_root(schema, root_config or args.config)
        policy = _build_policy(schema, root, args.workspace)
        return start_run(
            schema,
            root,
            registry,
            policy,
            seed=args.seed if seed is None else seed,
            observers=observers,
            approver=approver,
            approve_all=args.approve_all,
            provider_override=args.provider,
        )

    return factory


def cmd_run(args: argparse.Namespace) -> int:
    schema = _load(args.schema)
    report = validate_schema(schema)
    if not report.ok():
        for diag in report.errors:
            print(str(diag), file=sys.stderr)
        return 1
    factory = make_state_factory(schema, args)
    observers = []
    writer = None
    if args.log:
        writer = LogWriter(args.log)
        observers.append(writer.append)
    try:
        state = factory(observers=observers)
        record = run_to_completion(state)
    except AgentRunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if writer is not None:
            writer.close()
    table = summarize(record.events)
    print(render_table(table, fmt=args.format), end="")
    failures = [e for e in record.events if e.kind == "error"
                and e.payload.get("severity", "error") == "error"]
    for event in failures:
        print(f"error event seq {event.seq}: [{event.payload.get('code')}] "
              f"{event.payload.get('message')}", file=sys.stderr)
    if record.status != "done" or failures:
        return 1
    if any(label == "error" for row in table.rows for label in row.labels.values()):
        return 1
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    try:
        events = read_log(args.log)
        table = summarize(events)
    except OSError as exc:
        print(f"error: cannot read log: {exc}", file=sys.stderr)
        return 2
    except RunLogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(render_table(table, fmt=args.format, binary_labels=args.binary_labels), end="")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    schema = _load(args.schema)
    report = validate_schema(schema)
    if not report.ok():
        for diag in report.errors:
            print(str(diag), file=sys.stderr)
        return 1
    factory = make_state_factory(schema, args)
    try:
        server = serve(schema, factory, port=args.port, bind=args.bind, ui_dir=args.ui)
    except OSError as exc:
        print(f"error: cannot bind port {args.port}: {exc}", file=sys.stderr)
        return 2
    print(f"serving on http://{args.bind}:{args.port}/ (Ctrl-C to stop)", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("schema", help="schema document (.agents.json)")
    parser.add_argument("--config", help="agent-config id or agent-type id to run")
    parser.add_argument(
        "--provider",
        choices=["replay", "openai-compatible", "local-runtime"],
        help="override every LLM config's provider",
    )
    parser.add_argument("--fixtures", help="fixture file or directory for the replay provider")
    parser.add_argument("--record", help="record live responses into this fixture file")
    parser.add_argument("--workspace", help="sandbox workspace root (default: fresh temp dir)")
    parser.add_argument("--seed", type=int, default=0, help="instance-id generator seed")
    parser.add_argument(
        "--approve-all", action="store_true", help="bypass the approval gate (non-interactive)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentrun", description="Run schema-specified LLM agents."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="parse and validate a schema document")
    p_validate.add_argument("schema")
    p_validate.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="run a schema to completion and print the summary")
    _add_run_options(p_run)
    p_run.add_argument("--log", help="write the run log to this path (.runlog.jsonl)")
    p_run.add_argument("--format", choices=["text", "csv", "structured"], default="text")
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="summarize a recorded run log")
    p_report.add_argument("log")
    p_report.add_argument("--format", choices=["text", "csv", "structured"], default="text")
    p_report.add_argument(
        "--binary-labels",
        action="store_true",
        help="collapse unmatched/error into incorrect",
    )
    p_report.set_defaults(func=cmd_report)

    p_serve = sub.add_parser("serve", help="serve the event-stream/control API")
    _add_run_options(p_serve)
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--bind", default="127.0.0.1")
    p_serve.add_argument("--ui", help="static console UI bundle directory")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except AgentRunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
