// Wiring: live mode subscribes to the serve API on the same origin;
// playback mode loads a .runlog.jsonl file and scrubs through it.

import { abortRun, approveAction, denyAction, startRun } from "./api.js";
import { Playback } from "./playback.js";
import { renderView } from "./render.js";
import type { StreamHandle } from "./stream.js";
import { subscribeEvents } from "./stream.js";
import { applyEvent, createView } from "./view.js";

const base = "";

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const root = byId<HTMLDivElement>("view");
const scrubber = byId<HTMLInputElement>("scrubber");
const scrubLabel = byId<HTMLSpanElement>("scrub-label");

let view = createView();
let stream: StreamHandle | null = null;
let playback: Playback | null = null;

const handlers = {
  onApprove: (seq: number) => void approveAction(base, seq).catch(showError),
  onDeny: (seq: number) => void denyAction(base, seq).catch(showError),
};

function showError(error: unknown): void {
  const toast = document.createElement("div");
  toast.className = "toast";
  toast.textContent = String(error);
  document.body.appendChild(toast);
  setTimeout(() => toast.remove(), 4000);
}

function draw(): void {
  renderView(root, view, handlers);
}

function goLive(): void {
  playback = null;
  scrubber.hidden = true;
  scrubLabel.hidden = true;
  stream?.close();
  view = createView();
  draw();
  stream = subscribeEvents(base, (event) => {
    applyEvent(view, event);
    draw();
  }, { onError: () => undefined });
}

byId<HTMLButtonElement>("start").addEventListener("click", () => {
  if (!stream) goLive();
  startRun(base).catch(showError);
});

byId<HTMLButtonElement>("abort").addEventListener("click", () => {
  abortRun(base).catch(showError);
});

byId<HTMLInputElement>("logfile").addEventListener("change", (change) => {
  const input = change.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  void file.text().then((text) => {
    stream?.close();
    stream = null;
    playback = Playback.fromText(text);
    scrubber.hidden = false;
    scrubLabel.hidden = false;
    scrubber.max = String(playback.length);
    scrubber.value = scrubber.max;
    scrub();
  });
});

function scrub(): void {
  if (!playback) return;
  const position = Number(scrubber.value);
  scrubLabel.textContent = `${position}/${playback.length}`;
  view = playback.viewAt(position);
  draw();
}

scrubber.addEventListener("input", scrub);

goLive();
