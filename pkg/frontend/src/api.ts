// Control surface: start, approve/deny, abort, schema, summary.

async function post(url: string, body: unknown): Promise<Record<string, unknown>> {
  const response = await fetch(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body ?? {}),
  });
  const parsed = (await response.json().catch(() => ({}))) as Record<string, unknown>;
  if (!response.ok) {
    throw new Error(String(parsed.error ?? `HTTP ${response.status}`));
  }
  return parsed;
}

export function startRun(base: string, config?: string, seed?: number) {
  return post(`${base}/api/runs`, { config, seed });
}

export function approveAction(base: string, seq: number) {
  return post(`${base}/api/approvals/${seq}`, { decision: "approve" });
}

export function denyAction(base: string, seq: number) {
  return post(`${base}/api/approvals/${seq}`, { decision: "deny" });
}

export function abortRun(base: string) {
  return post(`${base}/api/abort`, {});
}

export async function fetchSummary(base: string): Promise<Record<string, unknown>> {
  const response = await fetch(`${base}/api/summary`);
  if (!response.ok) throw new Error(`HTTP ${response.status}`);
  return (await response.json()) as Record<string, unknown>;
}

export async function fetchSchema(base: string): Promise<unknown> {
  const response = await fetch(`${base}/api/schema`);
  if (!response.ok) throw new Error(`HTTP ${response.status}`);
  return response.json();
}
