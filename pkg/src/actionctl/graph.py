"""Entity graphs over a small JSON-LD subset.

The subset keeps exactly what action annotations need: one document-level
@context (the schema.org vocabulary, optionally binding the webapi prefix),
@type, @id, plain literals, nested objects and arrays.  Remote contexts,
@graph, @reverse and the rest of JSON-LD 1.1 are rejected up front so that
parsing stays deterministic and offline.

Graphs are treated as immutable once shared: set_path returns a new graph,
and the add_node/add_value helpers are meant for the construction phase only.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from urllib.parse import urlparse

SCHEMA_ORG = "http://schema.org/"
WEBAPI_VOCAB = "https://actions.semantify.it/vocab/"

# prefixes a document context may bind, and the only IRIs they may point at
ALLOWED_PREFIXES = {"webapi": WEBAPI_VOCAB}

LITERAL_KINDS = ("text", "number", "boolean", "date", "datetime", "url")

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class DocumentSyntaxError(ToolkitError):
    """Document is not valid JSON or breaks a structural rule of the subset."""


class UnsupportedFeatureError(ToolkitError):
    """Document uses JSON-LD machinery outside the supported subset."""


class ContextError(ToolkitError):
    """Unknown prefix, or a context binding outside the allowed set."""


class PathConflictError(ToolkitError):
    """set_path hit a literal where it needed to traverse into a node."""


def is_iri(value: str) -> bool:
    """Loose IRI check: a scheme plus some body, no whitespace."""
    if not value or any(c.isspace() for c in value):
        return False
    parsed = urlparse(value)
    return bool(parsed.scheme) and bool(parsed.netloc or parsed.path)


def _valid_date(value: str) -> bool:
    if not _DATE_RE.match(value):
        return False
    try:
        date.fromisoformat(value)
    except ValueError:
        return False
    return True


def _valid_datetime(value: str) -> bool:
    # ISO-8601 with an explicit offset; Python 3.10 fromisoformat has no 'Z'
    text = value[:-1] + "+00:00" if value.endswith("Z") else value
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError:
        return False
    return parsed.tzinfo is not None


@dataclass(frozen=True)
class Literal:
    """A typed literal value; `value` holds the native form, `lexical` the string form."""

    kind: str
    value: str | int | float | bool

    def __post_init__(self) -> None:
        if self.kind not in LITERAL_KINDS:
            raise ValueError(f"unknown literal kind {self.kind!r}")
        v = self.value
        if self.kind == "number":
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValueError(f"number literal needs int or float, got {v!r}")
        elif self.kind == "boolean":
            if not isinstance(v, bool):
                raise ValueError(f"boolean literal needs bool, got {v!r}")
        else:
            if not isinstance(v, str):
                raise ValueError(f"{self.kind} literal needs str, got {v!r}")
            if self.kind == "date" and not _valid_date(v):
                raise ValueError(f"bad date literal {v!r}")
            if self.kind == "datetime" and not _valid_datetime(v):
                raise ValueError(f"bad datetime literal {v!r}")
            if self.kind == "url" and not is_iri(v):
                raise ValueError(f"bad url literal {v!r}")

    @property
    def lexical(self) -> str:
        if self.kind == "boolean":
            return "true" if self.value else "false"
        if self.kind == "number":
            return json.dumps(self.value)
        return str(self.value)


@dataclass(frozen=True)
class Ref:
    """Reference to a node by its internal key."""

    key: str


Value = Literal | Ref


@dataclass
class Node:
    """One graph node: optional IRI id, ordered type names, ordered property values."""

    id: str | None = None
    types: list[str] = field(default_factory=list)
    properties: dict[str, list[Value]] = field(default_factory=dict)

    def copy(self) -> Node:
        return Node(self.id, list(self.types), {k: list(v) for k, v in self.properties.items()})


@dataclass(frozen=True)
class Context:
    """Document context: vocabulary base plus the optional prefix bindings."""

    base: str = SCHEMA_ORG
    prefixes: tuple[tuple[str, str], ...] = ()

    def has_prefix(self, name: str) -> bool:
        return any(p == name for p, _ in self.prefixes)


@dataclass
class EntityGraph:
    """Roots plus a node table; every node is reachable from the roots."""

    roots: list[Ref] = field(default_factory=list)
    nodes: dict[str, Node] = field(default_factory=dict)
    context: Context = field(default_factory=Context)

    def node(self, ref: Ref) -> Node:
        return self.nodes[ref.key]

    def copy(self) -> EntityGraph:
        return EntityGraph(list(self.roots), {k: n.copy() for k, n in self.nodes.items()}, self.context)


def new_graph(context: Context | None = None) -> EntityGraph:
    return EntityGraph(context=context or Context())


def add_node(
    g: EntityGraph,
    *,
    types: list[str] | tuple[str, ...] = (),
    id: str | None = None,
    root: bool = False,
) -> Ref:
    """Construction helper: append a fresh node, optionally as a root."""
    n = len(g.nodes)
    while f"n{n}" in g.nodes:
        n += 1
    ref = Ref(f"n{n}")
    g.nodes[ref.key] = Node(id=id, types=list(types))
    if root:
        g.roots.append(ref)
    return ref


def add_value(g: EntityGraph, ref: Ref, prop: str, value: Value) -> None:
    """Construction helper: append one value under a property."""
    g.node(ref).properties.setdefault(prop, []).append(value)


# ---------------------------------------------------------------------------
# parsing

def _load_json(document: str):
    def reject_dups(pairs):
        seen = set()
        for k, _ in pairs:
            if k in seen:
                raise DocumentSyntaxError(f"duplicate key {k!r} in one object")
            seen.add(k)
        return dict(pairs)

    try:
        return json.loads(document, object_pairs_hook=reject_dups)
    except DocumentSyntaxError:
        raise
    except (json.JSONDecodeError, RecursionError, ValueError) as exc:
        raise DocumentSyntaxError(f"not valid JSON: {exc}") from exc


def _normalize_vocab_iri(iri: str) -> str | None:
    flat = iri.rstrip("/")
    if flat in ("http://schema.org", "https://schema.org"):
        return SCHEMA_ORG
    if flat == WEBAPI_VOCAB.rstrip("/"):
        return WEBAPI_VOCAB
    return None


def _parse_context(raw) -> Context:
    if isinstance(raw, str):
        base = _normalize_vocab_iri(raw)
        if base is None:
            raise UnsupportedFeatureError(f"remote context {raw!r} is not supported")
        return Context(base=base)
    if isinstance(raw, dict):
        base = SCHEMA_ORG
        prefixes: list[tuple[str, str]] = []
        for key, val in raw.items():
            if key == "@vocab":
                if not isinstance(val, str) or _normalize_vocab_iri(val) is None:
                    raise UnsupportedFeatureError(f"@vocab {val!r} is not supported")
                base = _normalize_vocab_iri(val)  # type: ignore[assignment]
            elif key.startswith("@"):
                raise UnsupportedFeatureError(f"context keyword {key!r} is not supported")
            else:
                allowed = ALLOWED_PREFIXES.get(key)
                if allowed is None:
                    raise ContextError(f"prefix {key!r} is not in the allowed set")
                if not isinstance(val, str) or val.rstrip("/") != allowed.rstrip("/"):
                    raise ContextError(f"prefix {key!r} must bind to {allowed!r}")
                prefixes.append((key, allowed))
        return Context(base=base, prefixes=tuple(prefixes))
    raise DocumentSyntaxError(f"@context must be a string or object, got {type(raw).__name__}")


class _Parser:
    def __init__(self, context: Context):
        self.g = EntityGraph(context=context)
        self.by_label: dict[str, Ref] = {}

    def check_term(self, name: str) -> None:
        if ":" in name:
            prefix = name.split(":", 1)[0]
            if not self.g.context.has_prefix(prefix):
                raise ContextError(f"unknown prefix {prefix!r} in {name!r}")

    def walk(self, obj: dict, top_level: bool) -> Ref:
        for key in obj:
            if key.startswith("@") and key not in ("@context", "@id", "@type"):
                raise UnsupportedFeatureError(f"{key} is not supported")
        if "@context" in obj and not top_level:
            raise UnsupportedFeatureError("@context is only supported on top-level objects")

        raw_id = obj.get("@id")
        ref: Ref | None = None
        if raw_id is not None:
            if not isinstance(raw_id, str):
                raise DocumentSyntaxError("@id must be a string")
            ref = self.by_label.get(raw_id)
            if ref is None:
                # blank node labels are document-scoped; they resolve references
                # but are not kept as node identity
                node_id = None if raw_id.startswith("_:") else raw_id
                ref = add_node(self.g, id=node_id)
                self.by_label[raw_id] = ref
        if ref is None:
            ref = add_node(self.g)
        node = self.g.node(ref)

        raw_types = obj.get("@type")
        if raw_types is not None:
            if isinstance(raw_types, str):
                raw_types = [raw_types]
            if not isinstance(raw_types, list) or not all(isinstance(t, str) for t in raw_types):
                raise DocumentSyntaxError("@type must be a string or array of strings")
            for t in raw_types:
                self.check_term(t)
                if t not in node.types:
                    node.types.append(t)

        for key, raw in obj.items():
            if key in ("@context", "@id", "@type"):
                continue
            self.check_term(key)
            values = raw if isinstance(raw, list) else [raw]
            if isinstance(raw, list) and any(isinstance(v, list) for v in raw):
                raise UnsupportedFeatureError("nested arrays are not supported")
            for v in values:
                node.properties.setdefault(key, []).append(self.value(v))
        return ref

    def value(self, raw) -> Value:
        if isinstance(raw, dict):
            return self.walk(raw, top_level=False)
        if isinstance(raw, bool):
            return Literal("boolean", raw)
        if isinstance(raw, (int, float)):
            return Literal("number", raw)
        if isinstance(raw, str):
            return Literal("text", raw)
        if raw is None:
            raise UnsupportedFeatureError("null values are not supported")
        if isinstance(raw, list):
            raise UnsupportedFeatureError("nested arrays are not supported")
        raise DocumentSyntaxError(f"unsupported value {raw!r}")


def parse_graph(document: str) -> EntityGraph:
    """Parse a JSON-LD document in the supported subset into an EntityGraph."""
    data = _load_json(document)
    if isinstance(data, dict):
        top = [data]
    elif isinstance(data, list):
        top = data
    else:
        raise DocumentSyntaxError("top level must be an object or array of objects")
    for item in top:
        if not isinstance(item, dict):
            raise DocumentSyntaxError("top level array may only contain objects")

    context = Context()
    seen_context = None
    for item in top:
        if "@context" in item:
            ctx = _parse_context(item["@context"])
            if seen_context is not None and ctx != seen_context:
                raise UnsupportedFeatureError("conflicting @context values across roots")
            seen_context = ctx
    if seen_context is not None:
        context = seen_context

    parser = _Parser(context)
    try:
        for item in top:
            parser.g.roots.append(parser.walk(item, top_level=True))
    except RecursionError as exc:
        raise DocumentSyntaxError("document is too deeply nested") from exc
    return parser.g


# ---------------------------------------------------------------------------
# serialization

def serialize_graph(g: EntityGraph) -> str:
    """Deterministic serialization; isomorphic graphs produce identical text."""
    counts: dict[str, int] = {}
    order: list[str] = []

    def count(ref: Ref) -> None:
        counts[ref.key] = counts.get(ref.key, 0) + 1
        if counts[ref.key] > 1:
            return
        order.append(ref.key)
        node = g.node(ref)
        for prop in sorted(node.properties):
            for v in node.properties[prop]:
                if isinstance(v, Ref):
                    count(v)

    for r in g.roots:
        count(r)

    labels: dict[str, str] = {}
    for key in order:
        node = g.nodes[key]
        if counts[key] > 1 and node.id is None:
            labels[key] = f"_:b{len(labels)}"

    emitted: set[str] = set()

    def emit(ref: Ref, top_level: bool):
        node = g.node(ref)
        name = node.id or labels.get(ref.key)
        if ref.key in emitted:
            return {"@id": name}
        emitted.add(ref.key)
        out: dict = {}
        if top_level:
            out["@context"] = _context_json(g.context)
        if name is not None:
            out["@id"] = name
        if node.types:
            out["@type"] = node.types[0] if len(node.types) == 1 else list(node.types)
        for prop in sorted(node.properties):
            vals = [_value_json(v) for v in node.properties[prop]]
            out[prop] = vals[0] if len(vals) == 1 else vals
        return out

    def _value_json(v: Value):
        if isinstance(v, Ref):
            return emit(v, top_level=False)
        return v.value

    if not g.roots:
        return "[]"
    docs = [emit(r, top_level=True) for r in g.roots]
    payload = docs[0] if len(docs) == 1 else docs
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)


def _context_json(ctx: Context):
    if not ctx.prefixes:
        return ctx.base
    out = {"@vocab": ctx.base}
    out.update({p: iri for p, iri in ctx.prefixes})
    return out


def isomorphic(a: EntityGraph, b: EntityGraph) -> bool:
    """Structural equality; blank nodes are matched by shape, ids by name."""
    return serialize_graph(a) == serialize_graph(b)


# ---------------------------------------------------------------------------
# property paths

@dataclass(frozen=True)
class PathStep:
    name: str
    is_type: bool


@dataclass(frozen=True)
class PropertyPath:
    """Dot-joined path; lowercase-initial segments traverse a property,
    uppercase-initial segments filter (or assert) a node type."""

    steps: tuple[PathStep, ...]

    @classmethod
    def parse(cls, text: str) -> PropertyPath:
        if not text:
            raise ValueError("empty property path")
        steps: list[PathStep] = []
        for seg in text.split("."):
            if not seg:
                raise ValueError(f"empty segment in path {text!r}")
            local = seg.split(":")[-1]
            steps.append(PathStep(seg, is_type=local[0].isupper()))
        if steps[0].is_type:
            raise ValueError(f"path {text!r} must start with a property step")
        for a, b in zip(steps, steps[1:]):
            if a.is_type and b.is_type:
                raise ValueError(f"path {text!r} has adjacent type steps")
        return cls(tuple(steps))

    def __str__(self) -> str:
        return ".".join(s.name for s in self.steps)

    def property_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.steps if not s.is_type)


def _as_path(path: PropertyPath | str) -> PropertyPath:
    return path if isinstance(path, PropertyPath) else PropertyPath.parse(path)


def get_path(g: EntityGraph, root: Ref, path: PropertyPath | str) -> list[Value]:
    """Evaluate a path from one root node; missing paths yield an empty list."""
    steps = _as_path(path).steps
    current: list[Ref] = [root]
    i = 0
    while i < len(steps):
        step = steps[i]
        if step.is_type:
            current = [r for r in current if step.name in g.node(r).types]
            i += 1
            continue
        values: list[Value] = []
        for r in current:
            values.extend(g.node(r).properties.get(step.name, []))
        if i == len(steps) - 1:
            return values
        current = [v for v in values if isinstance(v, Ref)]
        i += 1
    return list(current)


def set_path(g: EntityGraph, root: Ref, path: PropertyPath | str, value: Value) -> EntityGraph:
    """Append `value` at the path's terminal property, creating typed
    intermediate nodes as needed.  Returns a new graph."""
    steps = _as_path(path).steps
    if steps[-1].is_type:
        raise ValueError(f"path {path} must end with a property step for set_path")
    out = g.copy()
    cur = root
    i = 0
    while True:
        step = steps[i]
        node = out.node(cur)
        if i == len(steps) - 1:
            node.properties.setdefault(step.name, []).append(value)
            return out
        want_type = steps[i + 1].name if steps[i + 1].is_type else None
        existing = node.properties.get(step.name, [])
        nxt = None
        for v in existing:
            if isinstance(v, Ref) and (want_type is None or want_type in out.node(v).types):
                nxt = v
                break
        if nxt is None:
            if existing and all(isinstance(v, Literal) for v in existing):
                raise PathConflictError(f"{step.name} holds a literal, cannot traverse")
            nxt = add_node(out, types=[want_type] if want_type else [])
            node.properties.setdefault(step.name, []).append(nxt)
        cur = nxt
        i += 2 if want_type else 1
