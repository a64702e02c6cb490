"""Event-trace verification: stack discipline and per-cycle ordering.

Reconstructs the agent and prompt stacks from a run's event log and checks
the execution invariants that hold for any well-formed run:

  - sequence numbers are strictly increasing with no gaps
  - the top prompt always belongs to the top agent; agents pop in LIFO order
  - a child agent pushed by an invoke completes before its parent executes
    another prompt
  - within one prompt cycle, every execution-kind function event precedes
    every evaluation event

Returns violations as strings; an empty list means the trace is clean.
"""

from __future__ import annotations

from typing import Sequence

from .runlog import RunEvent


def verify_stack_discipline(events: Sequence[RunEvent]) -> list[str]:
    violations: list[str] = []
    agent_stack: list[str] = []
    prompt_stack: list[tuple[str, int]] = []
    active: tuple[str, int] | None = None
    saw_eval_this_cycle = False
    last_seq = 0

    def fail(event: RunEvent, message: str) -> None:
        violations.append(f"seq {event.seq} ({event.kind}): {message}")

    def pop_active(event: RunEvent) -> None:
        nonlocal active
        if active is None:
            return
        if not prompt_stack or prompt_stack[-1] != active:
            fail(event, f"active prompt {active} is not on top of the prompt stack")
        else:
            prompt_stack.pop()
        active = None

    for event in events:
        if event.seq != last_seq + 1:
            fail(event, f"sequence gap: expected {last_seq + 1}")
        last_seq = event.seq

        if event.kind == "run-started":
            root = event.payload["instance_id"]
            agent_stack.append(root)
            for index in reversed(event.payload["prompt_indices"]):
                prompt_stack.append((root, index))
        elif event.kind == "prompt-rendered":
            pop_active(event)
            key = (event.instance_id, event.prompt_index)
            if not agent_stack or agent_stack[-1] != event.instance_id:
                fail(event, f"rendered prompt for {event.instance_id}, top agent is "
                            f"{agent_stack[-1] if agent_stack else None}")
            if not prompt_stack or prompt_stack[-1] != key:
                fail(event, f"rendered {key}, top prompt is "
                            f"{prompt_stack[-1] if prompt_stack else None}")
            active = key
            saw_eval_this_cycle = False
        elif event.kind in ("llm-chunk", "llm-complete"):
            if active is None or event.instance_id != active[0]:
                fail(event, "llm traffic outside the active prompt's agent")
        elif event.kind == "action-executed":
            if active is None or event.instance_id != active[0]:
                fail(event, "action outside the active prompt's agent")
            if event.payload.get("function_kind") == "execution" and saw_eval_this_cycle:
                fail(event, "execution function ran after an evaluation event in the same cycle")
        elif event.kind == "evaluation":
            if active is None or event.instance_id != active[0]:
                fail(event, "evaluation outside the active prompt's agent")
            saw_eval_this_cycle = True
        elif event.kind == "invoke":
            if active is None or event.instance_id != active[0]:
                fail(event, "invoke outside the active prompt's agent")
            pop_active(event)
            child = event.payload["child_instance"]
            agent_stack.append(child)
            for index in reversed(event.payload["prompt_indices"]):
                prompt_stack.append((child, index))
        elif event.kind == "agent-completed":
            if active is not None and active[0] == event.instance_id:
                pop_active(event)
            if not agent_stack or agent_stack[-1] != event.instance_id:
                fail(event, f"completed {event.instance_id} out of LIFO order")
            else:
                agent_stack.pop()
            if any(inst == event.instance_id for inst, _ in prompt_stack):
                fail(event, "agent popped while its prompts remain on the stack")
        elif event.kind == "error":
            if event.payload.get("severity", "error") == "error" and active is not None:
                # the failed prompt is abandoned
                pop_active(event)
        elif event.kind == "run-finished":
            pop_active(event)
            if event.payload.get("status") == "done":
                if agent_stack:
                    fail(event, f"run finished with agents still stacked: {agent_stack}")
                if prompt_stack:
                    fail(event, f"run finished with prompts still stacked: {prompt_stack}")
    return violations


def child_completes_before_parent_resumes(
    events: Sequence[RunEvent], parent_instance: str, child_instance: str
) -> bool:
    """True when every event of the child precedes the parent's next
    prompt-rendered event after the invoke."""
    invoke_seq = None
    child_done_seq = None
    parent_next_prompt_seq = None
    for event in events:
        if (
            event.kind == "invoke"
            and event.payload.get("child_instance") == child_instance
        ):
            invoke_seq = event.seq
        if event.kind == "agent-completed" and event.instance_id == child_instance:
            child_done_seq = event.seq
        if (
            invoke_seq is not None
            and parent_next_prompt_seq is None
            and event.seq > invoke_seq
            and event.kind == "prompt-rendered"
            and event.instance_id == parent_instance
        ):
            parent_next_prompt_seq = event.seq
    if invoke_seq is None or child_done_seq is None:
        return False
    return parent_next_prompt_seq is None or child_done_seq < parent_next_prompt_seq
