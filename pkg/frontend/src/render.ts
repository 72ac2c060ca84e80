/** DOM rendering. Every builder derives widgets from server echoes only. */

import {
  AnnotationCard,
  SessionView,
  Widget,
  canInvoke,
  cardFromAnnotation,
  confirmationOf,
  visibleChoices,
  widgetFor,
} from "./model.js";

export interface Handlers {
  onSelect(actionId: string): void;
  onFill(path: string, value: string): void;
  onInvoke(): void;
  onChoose(index: number): void;
  onMore(): void;
  onRestart(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  host: Element,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = host.ownerDocument.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  host.appendChild(node);
  return node;
}

export function renderActionList(
  host: Element,
  annotations: Record<string, unknown>[],
  handlers: Handlers,
): AnnotationCard[] {
  host.textContent = "";
  el(host, "h2", "section-title", "Available actions");
  const list = el(host, "div", "card-list");
  const cards = annotations.map(cardFromAnnotation);
  if (!cards.length) {
    el(list, "p", "empty", "This entry point offers no actions.");
    return cards;
  }
  for (const card of cards) {
    const item = el(list, "article", "card action-card");
    el(item, "h3", "intent", card.intent);
    el(item, "p", "meta", `${card.actionType} on ${card.objectTypes.join(", ") || "anything"}`);
    el(item, "p", "meta", `${card.slotCount} slot${card.slotCount === 1 ? "" : "s"}`);
    const button = el(item, "button", "select", "Start");
    button.addEventListener("click", () => handlers.onSelect(card.id));
  }
  return cards;
}

function renderWidget(form: Element, widget: Widget, handlers: Handlers): void {
  const row = el(form, "div", widget.readonly ? "slot bound" : "slot pending");
  const label = el(row, "label");
  label.textContent = widget.label;
  if (widget.required && !widget.readonly) {
    el(label, "span", "required-marker", " *");
  }
  const input = el(row, "input");
  input.type = widget.inputType;
  input.name = widget.path;
  input.value = widget.value;
  if (widget.required) input.required = true;
  if (widget.readonly) input.readOnly = true;
  if (widget.min !== undefined) input.min = String(widget.min);
  if (widget.max !== undefined) input.max = String(widget.max);
  if (widget.minLength !== undefined) input.minLength = widget.minLength;
  if (widget.maxLength !== undefined) input.maxLength = widget.maxLength;
  if (widget.pattern !== undefined) input.pattern = widget.pattern;
  if (!widget.readonly) {
    input.addEventListener("change", () => handlers.onFill(widget.path, input.value));
  }
}

function renderSlotForm(host: Element, session: SessionView, handlers: Handlers): void {
  const form = el(host, "div", "slot-form");
  for (const slot of session.boundSlots) {
    renderWidget(form, widgetFor(slot, true), handlers);
  }
  for (const slot of session.pendingSlots) {
    renderWidget(form, widgetFor(slot, false), handlers);
  }
  const invoke = el(host, "button", "invoke", "Invoke");
  invoke.disabled = !canInvoke(session.state);
  invoke.addEventListener("click", () => handlers.onInvoke());
}

function renderChoices(
  host: Element,
  session: SessionView,
  pages: number,
  handlers: Handlers,
): void {
  const { shown, hasMore } = visibleChoices(session.choices, pages);
  const list = el(host, "div", "card-list choices");
  for (const choice of shown) {
    const item = el(list, "article", "card choice-card");
    el(item, "h3", "choice-label", choice.label ?? choice.intent);
    if (choice.price !== null) {
      el(item, "p", "price", `${choice.price} ${choice.currency ?? ""}`.trim());
    }
    const button = el(item, "button", "choose", "Choose");
    button.addEventListener("click", () => handlers.onChoose(choice.index));
  }
  if (hasMore) {
    const more = el(host, "button", "more", "More");
    more.addEventListener("click", () => handlers.onMore());
  }
}

function renderConfirmation(host: Element, session: SessionView, handlers: Handlers): void {
  const panel = el(host, "div", "confirmation-panel");
  el(panel, "h3", "done", "Completed");
  const confirmation = confirmationOf(session);
  if (confirmation !== null) {
    el(panel, "p", "confirmation-number", confirmation);
  }
  for (const [key, value] of Object.entries(session.outputs)) {
    if (key === "confirmationNumber") continue;
    el(panel, "p", "output", `${key}: ${value}`);
  }
  const restart = el(panel, "button", "restart", "Start over");
  restart.addEventListener("click", () => handlers.onRestart());
}

function renderFailure(host: Element, session: SessionView, handlers: Handlers): void {
  const panel = el(host, "div", "failure-panel");
  el(panel, "h3", "failed", "Failed");
  const list = el(panel, "ul", "violations");
  for (const violation of session.violations) {
    el(list, "li", "violation", `${violation.code}: ${violation.detail}`);
  }
  const restart = el(panel, "button", "restart", "Start over");
  restart.addEventListener("click", () => handlers.onRestart());
}

export function renderSession(
  host: Element,
  session: SessionView,
  pages: number,
  notice: string | null,
  handlers: Handlers,
): void {
  host.textContent = "";
  const heading = session.action ? session.action.intent : "session";
  el(host, "h2", "section-title", heading);
  el(host, "p", "state", session.state);
  if (session.message) el(host, "p", "message", session.message);
  if (notice) el(host, "p", "notice", notice);

  switch (session.state) {
    case "Eliciting":
    case "ReadyToInvoke":
      renderSlotForm(host, session, handlers);
      break;
    case "Presenting":
      renderChoices(host, session, pages, handlers);
      break;
    case "Completed":
      renderConfirmation(host, session, handlers);
      break;
    default:
      renderFailure(host, session, handlers);
  }
}
