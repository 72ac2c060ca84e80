/** Pure view logic: session shapes, card derivation, widget specs, paging. */

export interface SlotPrompt {
  path: string;
  label: string;
  datatype: string;
  required: boolean;
  minValue: number | null;
  maxValue: number | null;
  minLength: number | null;
  maxLength: number | null;
  pattern: string | null;
  value: string | null;
}

export interface ChoiceView {
  index: number;
  label: string | null;
  price: number | null;
  currency: string | null;
  intent: string;
}

export interface ViolationView {
  code: string;
  node: string;
  detail: string;
  property?: string;
}

export interface SessionView {
  id: string;
  state: string;
  action: { intent: string; actionId: string | null; type: string } | null;
  pendingSlots: SlotPrompt[];
  boundSlots: SlotPrompt[];
  choices: ChoiceView[];
  outputs: Record<string, string>;
  violations: ViolationView[];
  message: string | null;
  transcript: unknown[];
}

export const PAGE_SIZE = 3;

/** First `pages` pages of choices plus whether a "more" control is needed. */
export function visibleChoices(
  all: ChoiceView[],
  pages: number,
): { shown: ChoiceView[]; hasMore: boolean } {
  const count = Math.max(1, pages) * PAGE_SIZE;
  return { shown: all.slice(0, count), hasMore: all.length > count };
}

/** "SearchAction" -> "search"; tolerates namespaced and bare names. */
export function intentVerb(actionType: string): string {
  const local = actionType.split(":").pop() ?? actionType;
  const stem = local.endsWith("Action") ? local.slice(0, -"Action".length) : local;
  return (stem || local).toLowerCase();
}

export interface AnnotationCard {
  id: string;
  intent: string;
  actionType: string;
  objectTypes: string[];
  slotCount: number;
}

function firstType(node: unknown): string[] {
  if (typeof node !== "object" || node === null) return [];
  const raw = (node as Record<string, unknown>)["@type"];
  if (typeof raw === "string") return [raw];
  if (Array.isArray(raw)) return raw.filter((t): t is string => typeof t === "string");
  return [];
}

function countInputSpecs(node: unknown): number {
  if (Array.isArray(node)) return node.reduce((n, item) => n + countInputSpecs(item), 0);
  if (typeof node !== "object" || node === null) return 0;
  let count = 0;
  for (const [key, value] of Object.entries(node as Record<string, unknown>)) {
    if (key.endsWith("-input")) count += 1;
    count += countInputSpecs(value);
  }
  return count;
}

/** Summarize one entry-document annotation for the action list. */
export function cardFromAnnotation(doc: Record<string, unknown>): AnnotationCard {
  const actionType = firstType(doc)[0] ?? "Action";
  const objectTypes = firstType(doc["object"]);
  const verb = intentVerb(actionType);
  const intent = objectTypes.length
    ? `${verb}.${objectTypes[0].toLowerCase()}`
    : verb;
  return {
    id: typeof doc["@id"] === "string" ? (doc["@id"] as string) : "",
    intent,
    actionType,
    objectTypes,
    slotCount: countInputSpecs(doc),
  };
}

export interface Widget {
  path: string;
  label: string;
  inputType: "date" | "number" | "checkbox" | "url" | "text";
  required: boolean;
  readonly: boolean;
  value: string;
  min?: number;
  max?: number;
  minLength?: number;
  maxLength?: number;
  pattern?: string;
}

/** Derive a form widget from one slot specification echo. */
export function widgetFor(slot: SlotPrompt, readonly: boolean): Widget {
  const w: Widget = {
    path: slot.path,
    label: slot.label,
    inputType: "text",
    required: slot.required,
    readonly,
    value: slot.value ?? "",
  };
  switch (slot.datatype) {
    case "Date":
      w.inputType = "date";
      break;
    case "Integer":
    case "Number":
      w.inputType = "number";
      if (slot.minValue !== null) w.min = slot.minValue;
      if (slot.maxValue !== null) w.max = slot.maxValue;
      break;
    case "Boolean":
      w.inputType = "checkbox";
      break;
    case "URL":
      w.inputType = "url";
      break;
    default:
      if (slot.minLength !== null) w.minLength = slot.minLength;
      if (slot.maxLength !== null) w.maxLength = slot.maxLength;
      if (slot.pattern !== null) w.pattern = slot.pattern;
  }
  return w;
}

export function canInvoke(state: string): boolean {
  return state === "ReadyToInvoke";
}

export function confirmationOf(session: SessionView): string | null {
  return session.outputs["confirmationNumber"] ?? null;
}
