"""Hypermedia flow engine: discover actions, elicit slots, invoke, advance.

A FlowSession walks one action at a time: required inputs are elicited
as slots, the filled request is validated locally before it ever leaves
the agent, and each response's potential actions become the next set of
choices.  Transport is injected as a callable so the engine runs against
a live gateway, an in-process app, or a test stub identically.
"""

from __future__ import annotations

import datetime
import json
import re
import uuid
from dataclasses import dataclass, field

from .actions import (
    ActionDescriptor,
    PropertyValueSpec,
    build_request_skeleton,
    extract_intent,
    parse_action,
    validate_request_inputs,
)
from .graph import (
    EntityGraph,
    Literal,
    Ref,
    ToolkitError,
    get_path,
    is_iri,
    parse_graph,
    serialize_graph,
    set_path,
    _valid_date,
    _valid_datetime,
)
from .vocab import Vocabulary

DISCOVERING = "Discovering"
ELICITING = "Eliciting"
READY_TO_INVOKE = "ReadyToInvoke"
PRESENTING = "Presenting"
COMPLETED = "Completed"
FAILED = "Failed"


class AgentError(ToolkitError):
    """Base for flow-engine failures."""


class CoercionError(AgentError):
    """Raw user input cannot be read as the slot's datatype."""


class ConstraintError(AgentError):
    """A coerced value violates the slot's declared constraints."""


class StateError(AgentError):
    """Operation called in a state that does not allow it."""


class IndexOutOfRangeError(AgentError):
    """Choice index outside the presented options."""


class UnreachableError(AgentError):
    """Entry document could not be fetched."""


def _human_label(path: str) -> str:
    # camelCase terminal property -> spaced words ("checkinTime" -> "checkin time")
    terminal = path.split(".")[-1].split(":")[-1]
    return re.sub(r"(?<=[a-z0-9])(?=[A-Z])", " ", terminal).lower()


@dataclass(frozen=True)
class SlotPrompt:
    """Presentation echo of one input spec, enough to render a form field."""

    path: str
    label: str
    datatype: str
    required: bool
    min_value: float | None = None
    max_value: float | None = None
    value_min_length: int | None = None
    value_max_length: int | None = None
    pattern: str | None = None
    current: str | None = None

    @classmethod
    def from_spec(cls, spec: PropertyValueSpec, current: str | None = None) -> SlotPrompt:
        return cls(
            path=spec.path,
            label=_human_label(spec.path),
            datatype=spec.datatype,
            required=spec.value_required,
            min_value=spec.min_value,
            max_value=spec.max_value,
            value_min_length=spec.value_min_length,
            value_max_length=spec.value_max_length,
            pattern=spec.value_pattern,
            current=current,
        )

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "label": self.label,
            "datatype": self.datatype,
            "required": self.required,
            "minValue": self.min_value,
            "maxValue": self.max_value,
            "minLength": self.value_min_length,
            "maxLength": self.value_max_length,
            "pattern": self.pattern,
            "value": self.current,
        }


@dataclass(frozen=True)
class Choice:
    """One selectable follow-up: a result root plus its potential action."""

    root_key: str
    descriptor: ActionDescriptor
    label: str | None = None
    price: str | None = None
    currency: str | None = None


@dataclass
class FlowSession:
    vocabulary: Vocabulary
    id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    state: str = DISCOVERING
    current: ActionDescriptor | None = None
    filled: EntityGraph | None = None
    pending: list[str] = field(default_factory=list)
    last_result: EntityGraph | None = None
    last_violations: list[dict] = field(default_factory=list)
    choices: list[Choice] = field(default_factory=list)
    transcript: list[dict] = field(default_factory=list)
    message: str | None = None


_TWO_DIGIT_PIVOT = 50  # dd.mm.yy: years below pivot are 20xx, the rest 19xx
_DOTTED_DATE = re.compile(r"(\d{1,2})\.(\d{1,2})\.(\d{2}|\d{4})$")


def coerce_value(raw: str, datatype: str) -> Literal:
    """Read structured user input per slot datatype; normalizes dates to ISO."""
    text = raw.strip()
    if not text:
        raise CoercionError("empty input")
    if datatype == "Integer":
        if not re.fullmatch(r"[+-]?\d+", text):
            raise CoercionError(f"{text!r} is not a whole number")
        return Literal("number", int(text))
    if datatype == "Number":
        try:
            value = float(text)
        except ValueError:
            raise CoercionError(f"{text!r} is not a number") from None
        return Literal("number", int(value) if value.is_integer() else value)
    if datatype == "Boolean":
        lowered = text.lower()
        if lowered in ("true", "yes", "y", "1"):
            return Literal("boolean", True)
        if lowered in ("false", "no", "n", "0"):
            return Literal("boolean", False)
        raise CoercionError(f"{text!r} is not yes/no")
    if datatype == "Date":
        return Literal("date", _coerce_date(text))
    if datatype == "DateTime":
        if not _valid_datetime(text):
            raise CoercionError(f"{text!r} is not an ISO date-time with timezone")
        return Literal("datetime", text)
    if datatype == "URL":
        if not is_iri(text):
            raise CoercionError(f"{text!r} is not an absolute URL")
        return Literal("url", text)
    return Literal("text", text)


def _coerce_date(text: str) -> str:
    if _valid_date(text):
        return text
    m = _DOTTED_DATE.fullmatch(text)
    if not m:
        raise CoercionError(f"{text!r} is not a date (use YYYY-MM-DD or D.M.YY)")
    day, month, year = int(m[1]), int(m[2]), int(m[3])
    if year < 100:
        year += 2000 if year < _TWO_DIGIT_PIVOT else 1900
    try:
        return datetime.date(year, month, day).isoformat()
    except ValueError as exc:
        raise CoercionError(f"{text!r}: {exc}") from None


def start_session(d: ActionDescriptor, v: Vocabulary) -> FlowSession:
    s = FlowSession(vocabulary=v)
    _enter_action(s, d)
    return s


def _enter_action(s: FlowSession, d: ActionDescriptor) -> None:
    s.current = d
    s.filled = build_request_skeleton(d)
    root = s.filled.roots[0]
    s.pending = [spec.path for spec in d.inputs
                 if spec.value_required and not get_path(s.filled, root, spec.path)]
    s.choices = []
    s.state = ELICITING if s.pending else READY_TO_INVOKE
    s.message = None
    s.transcript.append({"op": "start", "action": extract_intent(d).name})


def prompts(s: FlowSession) -> list[SlotPrompt]:
    """Form fields for every input, pending first, bound values echoed."""
    if s.current is None:
        return []
    root = s.filled.roots[0]
    out = []
    for path in s.pending:
        out.append(SlotPrompt.from_spec(s.current.input_at(path)))
    for spec in s.current.inputs:
        if spec.path in s.pending:
            continue
        values = [v for v in get_path(s.filled, root, spec.path) if isinstance(v, Literal)]
        out.append(SlotPrompt.from_spec(spec, values[0].lexical if values else None))
    return out


def _terminal_parent(g: EntityGraph, root: Ref, path: str) -> tuple[Ref, str] | None:
    head, _, last = path.rpartition(".")
    if not head:
        return root, path
    parents = [v for v in get_path(g, root, head) if isinstance(v, Ref)]
    return (parents[0], last) if parents else None


def fill_slot(s: FlowSession, path: str, raw: str) -> FlowSession:
    """Coerce, constraint-check, and store one slot value (replace, not append)."""
    if s.state not in (ELICITING, READY_TO_INVOKE):
        raise StateError(f"cannot fill slots in state {s.state}")
    spec = s.current.input_at(path)
    if spec is None:
        raise AgentError(f"action has no input at path {path!r}")
    try:
        lit = coerce_value(raw, spec.datatype)
    except CoercionError as exc:
        s.transcript.append({"op": "fill", "path": path, "raw": raw,
                             "ok": False, "error": str(exc)})
        raise

    baseline = {(v.code, v.node, v.prop, v.detail)
                for v in validate_request_inputs(s.current, s.filled, s.vocabulary).violations}
    root = s.filled.roots[0]
    located = _terminal_parent(s.filled, root, path)
    if located is None:
        s.filled = set_path(s.filled, root, path, lit)
        located = _terminal_parent(s.filled, root, path)
    parent, prop = located
    node = s.filled.node(parent)
    previous = node.properties.get(prop, [])
    node.properties[prop] = [lit]

    report = validate_request_inputs(s.current, s.filled, s.vocabulary)
    introduced = [v for v in report.violations
                  if (v.code, v.node, v.prop, v.detail) not in baseline]
    if introduced:
        if previous:
            node.properties[prop] = previous
        else:
            del node.properties[prop]
        detail = "; ".join(v.detail for v in introduced)
        s.transcript.append({"op": "fill", "path": path, "raw": raw,
                             "ok": False, "error": detail})
        raise ConstraintError(detail)

    if path in s.pending:
        s.pending.remove(path)
    s.state = ELICITING if s.pending else READY_TO_INVOKE
    s.transcript.append({"op": "fill", "path": path, "value": lit.lexical, "ok": True})
    return s


def invoke_current(s: FlowSession, transport) -> FlowSession:
    """Send the filled request; advance to Presenting, Completed, or Failed.

    `transport(url, body_text) -> (status, payload_dict)` raises on
    connection-level failure, which lands the session in Failed.
    """
    if s.state != READY_TO_INVOKE:
        raise StateError(f"cannot invoke in state {s.state}")
    report = validate_request_inputs(s.current, s.filled, s.vocabulary)
    if not report.ok:
        raise AgentError(f"refusing to send an invalid request: {report}")

    url = s.current.entry_point.url_template
    try:
        status, payload = transport(url, serialize_graph(s.filled))
    except Exception as exc:
        s.state = FAILED
        s.message = f"transport failure: {exc}"
        s.transcript.append({"op": "invoke", "ok": False, "error": str(exc)})
        return s
    if not isinstance(payload, dict):
        payload = {}
    s.last_violations = payload.get("violations") or []
    s.transcript.append({"op": "invoke", "status": status,
                         "ok": 200 <= status < 300 and not s.last_violations})

    if payload.get("response") is not None:
        try:
            s.last_result = parse_graph(json.dumps(payload["response"]))
        except ToolkitError:
            s.last_result = None
    if not 200 <= status < 300:
        s.state = FAILED
        s.message = f"gateway returned {status}"
        return s
    if s.last_violations:
        s.state = FAILED
        s.message = "response did not keep its promised outputs"
        return s

    s.choices = _collect_choices(s.last_result, s.vocabulary) if s.last_result else []
    if s.choices:
        s.state = PRESENTING
        s.message = f"found {len(s.last_result.roots)} items"
    else:
        s.state = COMPLETED
        s.message = f"{_human_label(s.current.action_type)} completed"
    return s


def _first_lexical(g: EntityGraph, root: Ref, *paths: str) -> str | None:
    for path in paths:
        for value in get_path(g, root, path):
            if isinstance(value, Literal):
                return value.lexical
    return None


def _collect_choices(lifted: EntityGraph, v: Vocabulary) -> list[Choice]:
    choices = []
    for root in lifted.roots:
        for ref in get_path(lifted, root, "potentialAction"):
            if not isinstance(ref, Ref):
                continue
            try:
                d = parse_action(lifted, ref, v)
            except ToolkitError:
                continue
            choices.append(Choice(
                root_key=root.key,
                descriptor=d,
                label=_first_lexical(lifted, root, "itemOffered.name", "name"),
                price=_first_lexical(lifted, root, "price"),
                currency=_first_lexical(lifted, root, "priceCurrency"),
            ))
    return choices


def choose(s: FlowSession, index: int) -> FlowSession:
    """Select one presented option; its action becomes the current one."""
    if s.state != PRESENTING:
        raise StateError(f"cannot choose in state {s.state}")
    if not 0 <= index < len(s.choices):
        raise IndexOutOfRangeError(f"choice {index} outside 0..{len(s.choices) - 1}")
    picked = s.choices[index]
    s.transcript.append({"op": "choose", "index": index, "label": picked.label})
    _enter_action(s, picked.descriptor)
    return s


def discover_actions(entry_url: str, v: Vocabulary,
                     fetch=None) -> tuple[list[ActionDescriptor], list[str]]:
    """Fetch /actions and parse each element; bad elements become diagnostics."""
    if fetch is None:
        fetch = _http_fetch
    url = entry_url if entry_url.rstrip("/").endswith("/actions") \
        else entry_url.rstrip("/") + "/actions"
    try:
        status, text = fetch(url)
    except Exception as exc:
        raise UnreachableError(f"cannot fetch {url}: {exc}") from exc
    if status != 200:
        raise UnreachableError(f"{url} answered {status}")
    try:
        items = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UnreachableError(f"{url} is not JSON: {exc}") from exc
    if isinstance(items, dict):
        items = [items]

    descriptors, diagnostics = [], []
    for i, item in enumerate(items):
        try:
            g = parse_graph(json.dumps(item))
            descriptors.append(parse_action(g, g.roots[0], v))
        except (ToolkitError, IndexError) as exc:
            diagnostics.append(f"element {i}: {exc}")
    if not items:
        diagnostics.append("entry document is empty")
    return descriptors, diagnostics


def _http_fetch(url: str) -> tuple[int, str]:
    import httpx

    resp = httpx.get(url, timeout=10.0)
    return resp.status_code, resp.text


def outputs_summary(s: FlowSession) -> dict[str, str]:
    """Promised output values present on the last result, keyed by path."""
    if s.last_result is None or s.current is None:
        return {}
    out = {}
    for spec in s.current.outputs:
        rel = spec.path[len("result."):] if spec.path.startswith("result.") else spec.path
        for root in s.last_result.roots:
            value = _first_lexical(s.last_result, root, rel)
            if value is not None:
                out[rel] = value
                break
    return out


def session_to_dict(s: FlowSession) -> dict:
    action = None
    if s.current is not None:
        intent = extract_intent(s.current)
        action = {"intent": intent.name, "actionId": s.current.id,
                  "type": s.current.action_type}
    return {
        "id": s.id,
        "state": s.state,
        "action": action,
        "pendingSlots": [p.to_dict() for p in prompts(s) if p.path in s.pending],
        "boundSlots": [p.to_dict() for p in prompts(s) if p.path not in s.pending],
        "choices": [{
            "index": i,
            "label": c.label,
            "price": c.price,
            "currency": c.currency,
            "intent": extract_intent(c.descriptor).name,
        } for i, c in enumerate(s.choices)],
        "outputs": outputs_summary(s) if s.state == COMPLETED else {},
        "violations": s.last_violations,
        "message": s.message,
        "transcript": list(s.transcript),
    }


def replay_transcript(transcript: list[dict], descriptors: list[ActionDescriptor],
                      transport, v: Vocabulary) -> FlowSession:
    """Re-run a recorded transcript against fresh state; returns the session."""
    s: FlowSession | None = None
    for record in transcript:
        op = record.get("op")
        if op == "start":
            wanted = record.get("action")
            match = [d for d in descriptors if extract_intent(d).name == wanted]
            if s is None:
                s = start_session(match[0] if match else descriptors[0], v)
            # starts after the first come from choose() replays; nothing to do
        elif op == "fill" and record.get("ok", True):
            fill_slot(s, record["path"], record.get("value", record.get("raw", "")))
        elif op == "invoke":
            invoke_current(s, transport)
        elif op == "choose":
            choose(s, record["index"])
    if s is None:
        raise AgentError("transcript has no start record")
    return s
