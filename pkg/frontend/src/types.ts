// Wire types for run events, matching the engine's .runlog.jsonl records
// and the /api/events stream.

export type EventKind =
  | "run-started"
  | "prompt-rendered"
  | "llm-chunk"
  | "llm-complete"
  | "action-executed"
  | "evaluation"
  | "invoke"
  | "agent-completed"
  | "approval-requested"
  | "approval-resolved"
  | "error"
  | "run-finished";

export interface RunEvent {
  seq: number;
  timestamp: string;
  kind: EventKind;
  instance_id: string | null;
  prompt_index: number | null;
  payload: Record<string, unknown>;
}

export interface RunStartedPayload {
  instance_id: string;
  agent_type: string;
  llm_config: string;
  prompt_indices: number[];
  config_id: string;
  seed: number;
}

export interface InvokePayload {
  parent_instance: string;
  child_instance: string;
  child_type: string;
  llm_config: string;
  prompt_indices: number[];
  data_keys: string[];
}

export interface EvaluationPayload {
  label: string;
  matched_class: string | null;
  expected_class: string | null;
  expected_value_hit: boolean | null;
  details: string;
  source: string;
}

export interface ActionExecutedPayload {
  function_id: string;
  function_kind: "execution" | "evaluation";
  outcome: {
    exit_status: number | null;
    stdout: string;
    stderr: string;
    written_keys: string[];
    duration_ms: number;
    details: string;
    timed_out: boolean;
  };
}

export function parseRunEvent(line: string): RunEvent {
  const obj = JSON.parse(line) as RunEvent;
  if (typeof obj.seq !== "number" || typeof obj.kind !== "string") {
    throw new Error(`not a run event: ${line.slice(0, 80)}`);
  }
  return obj;
}

export function parseRunLog(text: string): RunEvent[] {
  return text
    .split(/\r?\n/)
    .filter((line) => line.trim().length > 0)
    .map(parseRunEvent);
}
