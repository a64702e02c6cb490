// DOM projection of the view model. Full re-render per batch: runs are
// desk-scale and the view model is the source of truth, so no incremental
// bookkeeping is worth its complexity here.

import type { AgentPane, PendingApproval, RunView } from "./view.js";
import { summaryCells } from "./view.js";

export interface RenderHandlers {
  onApprove?: (seq: number) => void;
  onDeny?: (seq: number) => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderPane(doc: Document, view: RunView, pane: AgentPane): HTMLElement {
  const root = el(doc, "section", "pane" + (pane.completed ? " pane-completed" : ""));
  root.dataset.instance = pane.instanceId;
  const header = el(doc, "header", "pane-header");
  header.appendChild(el(doc, "span", "pane-title", pane.agentType));
  header.appendChild(el(doc, "span", "pane-sub", `${pane.instanceId} · ${pane.llmConfig}`));
  if (pane.lastLabel) {
    header.appendChild(el(doc, "span", `label label-${pane.lastLabel}`, pane.lastLabel));
  }
  root.appendChild(header);

  for (const bubble of pane.bubbles) {
    const node = el(doc, "div", `bubble bubble-${bubble.role}`);
    if (bubble.warning) node.classList.add("bubble-warning");
    if (bubble.role === "prompt") {
      const head = el(doc, "div", "bubble-head");
      head.appendChild(el(doc, "span", "bubble-tag", `prompt ${bubble.promptIndex ?? ""}`));
      if (bubble.badge) {
        head.appendChild(el(doc, "span", `badge badge-${bubble.badge}`, bubble.badge));
      }
      node.appendChild(head);
    }
    if (bubble.functionId) {
      node.appendChild(el(doc, "div", "bubble-fn", bubble.functionId));
    }
    if (bubble.reasoning !== null) {
      const details = el(doc, "details", "reasoning");
      details.appendChild(el(doc, "summary", undefined, "reasoning"));
      details.appendChild(el(doc, "pre", undefined, bubble.reasoning));
      node.appendChild(details); // collapsed by default
    }
    const body = el(doc, "pre", "bubble-text", bubble.text);
    if (bubble.streaming) body.classList.add("streaming");
    node.appendChild(body);
    root.appendChild(node);
  }

  const children = view.paneOrder
    .map((id) => view.panes[id])
    .filter((candidate) => candidate.parent === pane.instanceId);
  if (children.length > 0) {
    const nest = el(doc, "div", "pane-children");
    for (const child of children) {
      nest.appendChild(renderPane(doc, view, child));
    }
    root.appendChild(nest);
  }
  return root;
}

function renderApproval(
  doc: Document,
  pending: PendingApproval,
  handlers: RenderHandlers,
): HTMLElement {
  const banner = el(doc, "div", "approval-banner");
  banner.appendChild(
    el(doc, "span", "approval-text", `approval required: ${pending.functionId}`),
  );
  const preview = el(doc, "pre", "approval-preview", pending.preview);
  banner.appendChild(preview);
  const approve = el(doc, "button", "approve", "approve");
  approve.addEventListener("click", () => handlers.onApprove?.(pending.seq));
  const deny = el(doc, "button", "deny", "deny");
  deny.addEventListener("click", () => handlers.onDeny?.(pending.seq));
  banner.appendChild(approve);
  banner.appendChild(deny);
  return banner;
}

function renderSummary(doc: Document, view: RunView): HTMLElement {
  const table = el(doc, "table", "summary");
  const head = el(doc, "tr");
  for (const column of ["agent type", "llm config", "prompt", "label"]) {
    head.appendChild(el(doc, "th", undefined, column));
  }
  table.appendChild(head);
  for (const cell of summaryCells(view)) {
    const row = el(doc, "tr");
    row.appendChild(el(doc, "td", undefined, cell.agentType));
    row.appendChild(el(doc, "td", undefined, cell.llmConfig));
    row.appendChild(el(doc, "td", undefined, String(cell.promptIndex)));
    row.appendChild(el(doc, "td", `label-${cell.label}`, cell.label));
    table.appendChild(row);
  }
  return table;
}

export function renderView(
  root: HTMLElement,
  view: RunView,
  handlers: RenderHandlers = {},
): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  const status = el(doc, "div", `status status-${view.status}`);
  status.appendChild(el(doc, "span", "status-text", view.status));
  status.appendChild(
    el(
      doc,
      "span",
      "stack-view",
      `agents: ${view.agentStack.length} · prompts queued: ${view.promptStack.length}`,
    ),
  );
  status.appendChild(el(doc, "span", "seq", `seq ${view.lastSeq}`));
  root.appendChild(status);

  if (view.pendingApproval) {
    root.appendChild(renderApproval(doc, view.pendingApproval, handlers));
  }

  const panes = el(doc, "div", "panes");
  for (const id of view.paneOrder) {
    const pane = view.panes[id];
    if (pane.parent === null) {
      panes.appendChild(renderPane(doc, view, pane));
    }
  }
  root.appendChild(panes);
  root.appendChild(renderSummary(doc, view));

  for (const notice of view.notices) {
    root.appendChild(el(doc, "div", "notice", notice));
  }
}
