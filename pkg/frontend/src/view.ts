// Pure view model: the final view is a function of the event sequence, so
// re-feeding a recorded log reproduces the identical view and playback is
// just re-reduction up to a position.

import type {
  ActionExecutedPayload,
  EvaluationPayload,
  InvokePayload,
  RunEvent,
  RunStartedPayload,
} from "./types.js";

export type Badge = string; // "correct" | "incorrect" | "unmatched" | "error" | schema-defined

export interface Bubble {
  role: "prompt" | "assistant" | "action" | "note";
  promptIndex: number | null;
  text: string;
  reasoning: string | null; // rendered collapsed, toggleable
  functionId: string | null;
  badge: Badge | null; // terminal label, set on prompt bubbles
  streaming: boolean;
  warning: boolean;
}

export interface AgentPane {
  instanceId: string;
  agentType: string;
  llmConfig: string;
  parent: string | null;
  bubbles: Bubble[];
  completed: boolean;
  lastLabel: Badge | null;
}

export interface PendingApproval {
  seq: number;
  functionId: string;
  preview: string;
}

export interface SummaryCell {
  agentType: string;
  llmConfig: string;
  promptIndex: number;
  label: Badge;
}

export interface RunView {
  panes: Record<string, AgentPane>;
  paneOrder: string[];
  agentStack: string[];
  promptStack: Array<[string, number]>;
  pendingApproval: PendingApproval | null;
  status: "idle" | "running" | "done" | "aborted";
  lastSeq: number;
  notices: string[]; // non-fatal stream anomalies, newest last
}

export function createView(): RunView {
  return {
    panes: {},
    paneOrder: [],
    agentStack: [],
    promptStack: [],
    pendingApproval: null,
    status: "idle",
    lastSeq: 0,
    notices: [],
  };
}

function bubble(partial: Partial<Bubble> & Pick<Bubble, "role" | "text">): Bubble {
  return {
    promptIndex: null,
    reasoning: null,
    functionId: null,
    badge: null,
    streaming: false,
    warning: false,
    ...partial,
  };
}

function addPane(
  view: RunView,
  instanceId: string,
  agentType: string,
  llmConfig: string,
  parent: string | null,
): AgentPane {
  const pane: AgentPane = {
    instanceId,
    agentType,
    llmConfig,
    parent,
    bubbles: [],
    completed: false,
    lastLabel: null,
  };
  view.panes[instanceId] = pane;
  view.paneOrder.push(instanceId);
  return pane;
}

function pane(view: RunView, instanceId: string | null): AgentPane | null {
  return instanceId ? view.panes[instanceId] ?? null : null;
}

function popActivePrompt(view: RunView, instanceId: string | null): void {
  const top = view.promptStack[view.promptStack.length - 1];
  if (top && top[0] === instanceId) {
    view.promptStack.pop();
  }
}

/** Apply one event. Events at or below lastSeq are duplicates and ignored;
 * a gap is recorded as a notice but the event still applies. */
export function applyEvent(view: RunView, event: RunEvent): RunView {
  if (event.seq <= view.lastSeq) {
    return view;
  }
  if (event.seq !== view.lastSeq + 1 && view.lastSeq !== 0) {
    view.notices.push(`sequence gap: ${view.lastSeq} -> ${event.seq}`);
  }
  view.lastSeq = event.seq;

  switch (event.kind) {
    case "run-started": {
      const payload = event.payload as unknown as RunStartedPayload;
      addPane(view, payload.instance_id, payload.agent_type, payload.llm_config, null);
      view.agentStack.push(payload.instance_id);
      for (const index of [...payload.prompt_indices].reverse()) {
        view.promptStack.push([payload.instance_id, index]);
      }
      view.status = "running";
      break;
    }
    case "prompt-rendered": {
      const current = pane(view, event.instance_id);
      if (!current) break;
      // the previously active prompt (if any) completed once a new one renders
      const top = view.promptStack[view.promptStack.length - 1];
      if (top && !(top[0] === event.instance_id && top[1] === event.prompt_index)) {
        view.promptStack.pop();
      }
      current.bubbles.push(
        bubble({
          role: "prompt",
          promptIndex: event.prompt_index,
          text: String(event.payload.text ?? ""),
        }),
      );
      break;
    }
    case "llm-chunk": {
      const current = pane(view, event.instance_id);
      if (!current) break;
      const last = current.bubbles[current.bubbles.length - 1];
      if (last && last.role === "assistant" && last.streaming) {
        last.text += String(event.payload.text ?? "");
      } else {
        current.bubbles.push(
          bubble({
            role: "assistant",
            promptIndex: event.prompt_index,
            text: String(event.payload.text ?? ""),
            streaming: true,
          }),
        );
      }
      break;
    }
    case "llm-complete": {
      const current = pane(view, event.instance_id);
      if (!current) break;
      const last = current.bubbles[current.bubbles.length - 1];
      const content = String(event.payload.content ?? "");
      const reasoning =
        event.payload.reasoning == null ? null : String(event.payload.reasoning);
      if (last && last.role === "assistant" && last.streaming) {
        last.text = content;
        last.reasoning = reasoning;
        last.streaming = false;
      } else {
        current.bubbles.push(
          bubble({
            role: "assistant",
            promptIndex: event.prompt_index,
            text: content,
            reasoning,
          }),
        );
      }
      break;
    }
    case "action-executed": {
      const current = pane(view, event.instance_id);
      if (!current) break;
      const payload = event.payload as unknown as ActionExecutedPayload;
      const text = payload.outcome.stdout || payload.outcome.details;
      current.bubbles.push(
        bubble({
          role: "action",
          promptIndex: event.prompt_index,
          functionId: payload.function_id,
          text,
        }),
      );
      break;
    }
    case "evaluation": {
      const current = pane(view, event.instance_id);
      if (!current) break;
      const payload = event.payload as unknown as EvaluationPayload;
      for (let i = current.bubbles.length - 1; i >= 0; i--) {
        const candidate = current.bubbles[i];
        if (candidate.role === "prompt" && candidate.promptIndex === event.prompt_index) {
          candidate.badge = payload.label; // later evaluations overwrite: terminal label
          break;
        }
      }
      current.lastLabel = payload.label;
      break;
    }
    case "invoke": {
      const payload = event.payload as unknown as InvokePayload;
      popActivePrompt(view, payload.parent_instance);
      addPane(view, payload.child_instance, payload.child_type, payload.llm_config,
              payload.parent_instance);
      view.agentStack.push(payload.child_instance);
      for (const index of [...payload.prompt_indices].reverse()) {
        view.promptStack.push([payload.child_instance, index]);
      }
      break;
    }
    case "agent-completed": {
      popActivePrompt(view, event.instance_id);
      const current = pane(view, event.instance_id);
      if (current) {
        current.completed = true;
      }
      if (view.agentStack[view.agentStack.length - 1] === event.instance_id) {
        view.agentStack.pop();
      }
      break;
    }
    case "approval-requested": {
      view.pendingApproval = {
        seq: event.seq,
        functionId: String(event.payload.function_id ?? ""),
        preview: String(event.payload.preview ?? ""),
      };
      break;
    }
    case "approval-resolved": {
      if (
        view.pendingApproval &&
        view.pendingApproval.seq === Number(event.payload.request_seq)
      ) {
        view.pendingApproval = null;
      }
      break;
    }
    case "error": {
      const current = pane(view, event.instance_id);
      const warning = event.payload.severity === "warning";
      if (current) {
        current.bubbles.push(
          bubble({
            role: "note",
            promptIndex: event.prompt_index,
            text: `${event.payload.code}: ${event.payload.message}`,
            warning,
          }),
        );
        if (!warning && event.prompt_index != null) {
          for (let i = current.bubbles.length - 1; i >= 0; i--) {
            const candidate = current.bubbles[i];
            if (candidate.role === "prompt" && candidate.promptIndex === event.prompt_index) {
              if (candidate.badge === null) candidate.badge = "error";
              break;
            }
          }
        }
      }
      if (!warning) {
        popActivePrompt(view, event.instance_id);
      }
      break;
    }
    case "run-finished": {
      // completed prompts were already popped via agent-completed/error;
      // an aborted run's leftover stack stays visible as-is
      view.status = event.payload.status === "done" ? "done" : "aborted";
      view.pendingApproval = null;
      break;
    }
  }
  return view;
}

export function reduceEvents(events: Iterable<RunEvent>, base?: RunView): RunView {
  const view = base ?? createView();
  for (const event of events) {
    applyEvent(view, event);
  }
  return view;
}

/** Per-(agent type, llm config, prompt) terminal labels, for the summary pane. */
export function summaryCells(view: RunView): SummaryCell[] {
  const cells: SummaryCell[] = [];
  for (const id of view.paneOrder) {
    const p = view.panes[id];
    for (const b of p.bubbles) {
      if (b.role === "prompt" && b.badge !== null && b.promptIndex !== null) {
        cells.push({
          agentType: p.agentType,
          llmConfig: p.llmConfig,
          promptIndex: b.promptIndex,
          label: b.badge,
        });
      }
    }
  }
  return cells;
}

/** Stable serialization of the whole view, used for snapshot comparisons. */
export function snapshotView(view: RunView): string {
  return JSON.stringify(view);
}
