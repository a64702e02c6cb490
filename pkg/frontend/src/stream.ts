// Fetch-based SSE client for /api/events with resume and duplicate
// suppression. fetch + ReadableStream (rather than EventSource) so the same
// code runs in the browser and under the node test runner.

import type { RunEvent } from "./types.js";

export interface StreamOptions {
  since?: number;
  reconnect?: boolean; // resume from the last seen seq after a drop
  reconnectDelayMs?: number;
  onError?: (error: unknown) => void;
  onClose?: () => void;
}

export interface StreamHandle {
  close(): void;
  lastSeq(): number;
}

export function subscribeEvents(
  base: string,
  onEvent: (event: RunEvent) => void,
  options: StreamOptions = {},
): StreamHandle {
  let closed = false;
  let last = options.since ?? 0;
  const controllerRef: { current: AbortController | null } = { current: null };

  async function readOnce(): Promise<void> {
    const controller = new AbortController();
    controllerRef.current = controller;
    const response = await fetch(`${base}/api/events?since=${last}`, {
      headers: { Accept: "text/event-stream" },
      signal: controller.signal,
    });
    if (!response.ok || !response.body) {
      throw new Error(`event stream failed: HTTP ${response.status}`);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder("utf-8");
    let buffer = "";
    for (;;) {
      const { value, done } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      const frames = buffer.split(/\r?\n\r?\n/);
      buffer = frames.pop() ?? "";
      for (const frame of frames) {
        for (const line of frame.split(/\r?\n/)) {
          if (!line.startsWith("data:")) continue;
          const event = JSON.parse(line.slice(5).trim()) as RunEvent;
          if (event.seq <= last) continue; // duplicate after resume
          last = event.seq;
          onEvent(event);
        }
      }
    }
  }

  async function loop(): Promise<void> {
    while (!closed) {
      try {
        await readOnce();
      } catch (error) {
        if (closed) break;
        options.onError?.(error);
      }
      if (closed || !(options.reconnect ?? true)) break;
      await new Promise((resolve) => setTimeout(resolve, options.reconnectDelayMs ?? 500));
    }
    options.onClose?.();
  }

  void loop();
  return {
    close() {
      closed = true;
      controllerRef.current?.abort();
    },
    lastSeq: () => last,
  };
}
