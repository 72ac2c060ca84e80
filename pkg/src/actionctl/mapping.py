"""Mapping documents and the grounding/lifting engine.

A mapping document pairs each annotated action with the native shape of
one backend resource: where each input lands in the HTTP request (query,
path, body, header), how response JSON fields map back onto entity-graph
paths, and which follow-up actions get attached to lifted entities.

Grounding turns a filled request graph into a deterministic native
request (sorted query string, stable body key order); lifting turns a
native response into a typed entity graph with potential actions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from urllib.parse import quote

from .actions import (
    HTTP_METHODS,
    ActionDescriptor,
    AuthenticationSpec,
    action_roots,
    parse_action,
    serialize_action,
    validate_request_inputs,
)
from .graph import (
    Context,
    EntityGraph,
    Literal,
    PropertyPath,
    Ref,
    ToolkitError,
    add_node,
    add_value,
    get_path,
    new_graph,
    parse_graph,
    set_path,
    _valid_date,
    _valid_datetime,
    is_iri,
)
from .vocab import ValidationReport, Vocabulary, validate_graph


class MappingFormatError(ToolkitError):
    """The mapping document does not follow the documented shape."""


class UnresolvedActionRefError(ToolkitError):
    """A responseActions entry points at a resource id that does not exist."""


class DescriptorInvalidError(ToolkitError):
    """An embedded annotation cannot be parsed or fails validation."""


class MissingPathValueError(ToolkitError):
    """A URL path placeholder has no value in the filled request."""


class ValidationFailedError(ToolkitError):
    """Grounding refused a request graph that fails input validation."""

    def __init__(self, report: ValidationReport):
        super().__init__(str(report))
        self.report = report


class NativeParseError(ToolkitError):
    """A success response body is not valid JSON."""


class MissingCredentialsError(ToolkitError):
    """The authentication spec demands a credential that is not present."""


class TransformError(ToolkitError):
    """A named transform was fed a literal kind it cannot handle."""


LOCATIONS = ("query", "path", "body", "header")
_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z0-9_.-]+)\}")


# --- named value transforms (grounding direction) ---------------------------

def _identity(lit: Literal) -> Literal:
    return lit


def _date_to_iso(lit: Literal) -> Literal:
    if lit.kind == "date":
        return lit
    if lit.kind == "datetime":
        return Literal("date", lit.value[:10])
    if lit.kind == "text" and _valid_date(lit.value):
        return Literal("date", lit.value)
    raise TransformError(f"date-to-iso cannot read {lit.kind} literal {lit.lexical!r}")


def _number_to_text(lit: Literal) -> Literal:
    if lit.kind != "number":
        raise TransformError(f"number-to-text needs a number, got {lit.kind}")
    return Literal("text", lit.lexical)


def _boolean_negate(lit: Literal) -> Literal:
    if lit.kind != "boolean":
        raise TransformError(f"boolean-negate needs a boolean, got {lit.kind}")
    return Literal("boolean", not lit.value)


def _price_to_free_flag(lit: Literal) -> Literal:
    # free admission filter: true -> "free", false -> "paid"
    if lit.kind != "boolean":
        raise TransformError(f"price-to-free-flag needs a boolean, got {lit.kind}")
    return Literal("text", "free" if lit.value else "paid")


TRANSFORMS = {
    "identity": _identity,
    "date-to-iso": _date_to_iso,
    "number-to-text": _number_to_text,
    "boolean-negate": _boolean_negate,
    "price-to-free-flag": _price_to_free_flag,
}


@dataclass(frozen=True)
class InputBinding:
    spec_path: str  # may carry type steps; evaluated with get_path
    location: str
    native_name: str
    transform: str = "identity"


@dataclass(frozen=True)
class OutputBinding:
    native_path: str  # dot-separated keys, at most one [*]
    schema_path: str  # may carry type steps; written with set_path
    literal_kind: str

    @property
    def wildcard(self) -> bool:
        return "[*]" in self.native_path

    def split(self) -> tuple[str, str]:
        head, _, tail = self.native_path.partition("[*]")
        return head.rstrip("."), tail.lstrip(".")


@dataclass(frozen=True)
class BindField:
    from_native_path: str
    to_spec_default_path: str


@dataclass(frozen=True)
class Condition:
    node_type: str | None = None
    field_equals: tuple[str, object] | None = None


@dataclass(frozen=True)
class ResponseAction:
    action_ref: str
    bind_fields: tuple[BindField, ...] = ()
    condition: Condition | None = None


@dataclass(frozen=True)
class ResourceMapping:
    resource_id: str
    descriptor: ActionDescriptor
    native_method: str
    native_path_template: str
    input_bindings: tuple[InputBinding, ...] = ()
    output_bindings: tuple[OutputBinding, ...] = ()
    result_types: tuple[str, ...] = ()
    response_actions: tuple[ResponseAction, ...] = ()


@dataclass
class MappingDocument:
    id: str
    backend_base_url: str
    resources: tuple[ResourceMapping, ...]
    vocabulary: Vocabulary
    actions_by_id: dict[str, ResourceMapping] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.actions_by_id = {r.resource_id: r for r in self.resources}

    def resource(self, resource_id: str) -> ResourceMapping:
        if resource_id not in self.actions_by_id:
            raise UnresolvedActionRefError(f"no resource {resource_id!r} in mapping {self.id!r}")
        return self.actions_by_id[resource_id]


@dataclass(frozen=True)
class NativeRequest:
    method: str
    url: str
    headers: tuple[tuple[str, str], ...] = ()
    body: str | None = None

    def to_dict(self) -> dict:
        return {"method": self.method, "url": self.url,
                "headers": [list(h) for h in self.headers], "body": self.body}


# --- loading -----------------------------------------------------------------

def _require(cond: bool, message: str) -> None:
    if not cond:
        raise MappingFormatError(message)


def _parse_descriptor(entry: dict, v: Vocabulary, base_dir: Path | None) -> ActionDescriptor:
    if "descriptor" in entry:
        text = json.dumps(entry["descriptor"])
    elif "descriptorFile" in entry:
        _require(base_dir is not None, "descriptorFile needs a base directory to resolve against")
        text = (base_dir / entry["descriptorFile"]).read_text()
    else:
        raise MappingFormatError("resource needs a descriptor or descriptorFile")
    try:
        g = parse_graph(text)
        roots = action_roots(g, v) or list(g.roots)
        if not roots:
            raise DescriptorInvalidError("annotation document has no root node")
        descriptor = parse_action(g, roots[0], v)
    except DescriptorInvalidError:
        raise
    except ToolkitError as exc:
        raise DescriptorInvalidError(f"annotation does not parse: {exc}") from exc
    report = validate_graph(g, v)
    if not report.ok:
        raise DescriptorInvalidError(f"annotation fails validation: {report}")
    return descriptor


def _parse_resource(entry: dict, v: Vocabulary, base_dir: Path | None) -> ResourceMapping:
    _require(isinstance(entry, dict), "each resource must be an object")
    rid = entry.get("resourceId")
    _require(isinstance(rid, str) and bool(rid), "resource needs a resourceId")
    method = str(entry.get("nativeMethod", "GET")).upper()
    _require(method in HTTP_METHODS, f"{rid}: unsupported nativeMethod {method!r}")
    path = entry.get("nativePathTemplate", "/")
    _require(isinstance(path, str) and path.startswith("/"),
             f"{rid}: nativePathTemplate must start with '/'")

    inputs = []
    for raw in entry.get("inputBindings", []):
        _require(isinstance(raw, dict), f"{rid}: input binding must be an object")
        location = raw.get("location", "query")
        _require(location in LOCATIONS, f"{rid}: unknown binding location {location!r}")
        transform = raw.get("transform", "identity")
        _require(transform in TRANSFORMS, f"{rid}: unknown transform {transform!r}")
        _require(isinstance(raw.get("specPath"), str) and isinstance(raw.get("nativeName"), str),
                 f"{rid}: input binding needs specPath and nativeName")
        inputs.append(InputBinding(raw["specPath"], location, raw["nativeName"], transform))

    outputs = []
    for raw in entry.get("outputBindings", []):
        _require(isinstance(raw, dict), f"{rid}: output binding must be an object")
        native_path = raw.get("nativePath")
        kind = raw.get("literalKind")
        _require(isinstance(native_path, str) and isinstance(raw.get("schemaPath"), str),
                 f"{rid}: output binding needs nativePath and schemaPath")
        _require(kind in ("text", "number", "boolean", "date", "datetime", "url"),
                 f"{rid}: unknown literalKind {kind!r}")
        _require(native_path.count("[*]") <= 1,
                 f"{rid}: at most one [*] per nativePath, got {native_path!r}")
        outputs.append(OutputBinding(native_path, raw["schemaPath"], kind))
    prefixes = {b.split()[0] for b in outputs if b.wildcard}
    _require(len(prefixes) <= 1,
             f"{rid}: wildcard output bindings must share one array prefix, got {sorted(prefixes)}")

    placeholders = set(_PLACEHOLDER_RE.findall(path))
    path_names = {b.native_name for b in inputs if b.location == "path"}
    _require(placeholders <= path_names,
             f"{rid}: path placeholders {sorted(placeholders - path_names)} have no path binding")

    response_actions = []
    for raw in entry.get("responseActions", []):
        _require(isinstance(raw, dict) and isinstance(raw.get("actionRef"), str),
                 f"{rid}: responseActions entries need an actionRef")
        condition = None
        if raw.get("condition") is not None:
            c = raw["condition"]
            _require(isinstance(c, dict), f"{rid}: condition must be an object")
            fe = None
            if c.get("fieldEquals") is not None:
                _require(isinstance(c["fieldEquals"], dict)
                         and isinstance(c["fieldEquals"].get("field"), str),
                         f"{rid}: fieldEquals needs a field name")
                fe = (c["fieldEquals"]["field"], c["fieldEquals"].get("value"))
            condition = Condition(node_type=c.get("nodeType"), field_equals=fe)
        bind_fields = tuple(
            BindField(bf["fromNativePath"], bf["toSpecDefaultPath"])
            for bf in raw.get("bindFields", []))
        response_actions.append(ResponseAction(raw["actionRef"], bind_fields, condition))

    return ResourceMapping(
        resource_id=rid,
        descriptor=_parse_descriptor(entry, v, base_dir),
        native_method=method,
        native_path_template=path,
        input_bindings=tuple(inputs),
        output_bindings=tuple(outputs),
        result_types=tuple(entry.get("resultTypes", [])),
        response_actions=tuple(response_actions),
    )


def load_mapping(document: str, v: Vocabulary, *, base_dir: Path | str | None = None) -> MappingDocument:
    """Parse and cross-check a mapping document."""
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MappingFormatError(f"mapping is not valid JSON: {exc}") from exc
    _require(isinstance(data, dict), "mapping document must be a JSON object")
    _require(isinstance(data.get("id"), str) and bool(data["id"]), "mapping needs an id")
    base = data.get("backendBaseUrl")
    _require(isinstance(base, str) and re.match(r"^[A-Za-z][A-Za-z0-9+.-]*:", base) is not None,
             "backendBaseUrl must be an absolute URL")
    raw_resources = data.get("resources")
    _require(isinstance(raw_resources, list), "mapping needs a resources array")

    base_dir = Path(base_dir) if base_dir is not None else None
    resources = tuple(_parse_resource(r, v, base_dir) for r in raw_resources)
    ids = [r.resource_id for r in resources]
    _require(len(ids) == len(set(ids)), f"duplicate resource ids in {sorted(ids)}")
    known = set(ids)
    for r in resources:
        for ra in r.response_actions:
            if ra.action_ref not in known:
                raise UnresolvedActionRefError(
                    f"{r.resource_id}: responseActions reference {ra.action_ref!r}, "
                    f"which is not a resource id")
    return MappingDocument(data["id"], base.rstrip("/"), resources, v)


def load_mapping_file(path: Path | str, v: Vocabulary) -> MappingDocument:
    path = Path(path)
    return load_mapping(path.read_text(), v, base_dir=path.parent)


# --- grounding ---------------------------------------------------------------

def _native_value(lit: Literal):
    if lit.kind in ("number", "boolean"):
        return lit.value
    return str(lit.value)


def _canonical_query(pairs: list[tuple[str, str]]) -> str:
    encoded = sorted((quote(k, safe=""), quote(v, safe="")) for k, v in pairs)
    return "&".join(f"{k}={v}" for k, v in encoded)


def _split_query(url: str) -> tuple[str, list[tuple[str, str]]]:
    from urllib.parse import parse_qsl

    base, _, qs = url.partition("?")
    return base, parse_qsl(qs, keep_blank_values=True)


def ground_request(m: MappingDocument, resource_id: str, filled: EntityGraph,
                   auth: AuthenticationSpec) -> NativeRequest:
    """Turn a validated request graph into the backend's native request."""
    r = m.resource(resource_id)
    report = validate_request_inputs(r.descriptor, filled, m.vocabulary)
    if not report.ok:
        raise ValidationFailedError(report)
    root = filled.roots[0]

    query: list[tuple[str, str]] = []
    headers: list[tuple[str, str]] = []
    body_fields: dict = {}
    path_values: dict[str, str] = {}
    for b in r.input_bindings:
        literals = [v for v in get_path(filled, root, b.spec_path) if isinstance(v, Literal)]
        literals = [TRANSFORMS[b.transform](v) for v in literals]
        if not literals:
            if b.location == "path":
                raise MissingPathValueError(
                    f"path placeholder {b.native_name!r} has no value at {b.spec_path}")
            continue
        if b.location == "query":
            query.extend((b.native_name, lit.lexical) for lit in literals)
        elif b.location == "path":
            path_values[b.native_name] = literals[0].lexical
        elif b.location == "header":
            headers.append((b.native_name, literals[0].lexical))
        else:
            body_fields[b.native_name] = _native_value(literals[0])

    path = r.native_path_template
    for name, value in path_values.items():
        path = path.replace("{" + name + "}", quote(value, safe=""))

    url = m.backend_base_url + path
    qs = _canonical_query(query)
    if qs:
        url = f"{url}?{qs}"

    body = None
    ep = r.descriptor.entry_point
    if body_fields or ep.encoding_type is not None:
        body = json.dumps(body_fields, sort_keys=True)
        headers.append(("Content-Type", ep.encoding_type or "application/json"))

    req = NativeRequest(r.native_method, url, tuple(headers), body)
    return build_auth_header(auth, req)


def build_auth_header(a: AuthenticationSpec, req: NativeRequest) -> NativeRequest:
    """Apply credentials to a native request; replaces, never duplicates."""
    if a.method == "none":
        return req
    if a.method in ("token", "basic"):
        if a.token is None:
            raise MissingCredentialsError(f"{a.method} authentication without a token")
        scheme = "Bearer" if a.method == "token" else "Basic"
        headers = tuple(h for h in req.headers if h[0].lower() != "authorization")
        return replace(req, headers=headers + (("Authorization", f"{scheme} {a.token}"),))
    if a.method == "custom":
        if not a.name or a.value is None or a.placement not in ("header", "body", "url"):
            raise MissingCredentialsError("custom authentication needs name, value, placement")
        if a.placement == "header":
            headers = tuple(h for h in req.headers if h[0].lower() != a.name.lower())
            return replace(req, headers=headers + ((a.name, a.value),))
        if a.placement == "body":
            fields = json.loads(req.body) if req.body else {}
            fields[a.name] = a.value
            return replace(req, body=json.dumps(fields, sort_keys=True))
        base, pairs = _split_query(req.url)
        pairs = [(k, v) for k, v in pairs if k != a.name] + [(a.name, a.value)]
        return replace(req, url=f"{base}?{_canonical_query(pairs)}")
    raise MissingCredentialsError(f"unsupported authentication method {a.method!r}")


# --- lifting -----------------------------------------------------------------

_MISS = object()


def _read_native(data, path: str):
    """Follow dot-separated keys; `_MISS` when any step is absent."""
    current = data
    for part in path.split("."):
        if not isinstance(current, dict) or part not in current:
            return _MISS
        current = current[part]
    return current


def _to_literal(kind: str, value) -> Literal | None:
    """Coerce one native JSON value; None when the shapes disagree."""
    if value is None:
        return None
    if kind == "text":
        if isinstance(value, bool):
            return Literal("text", "true" if value else "false")
        if isinstance(value, (int, float)):
            return Literal("text", json.dumps(value))
        return Literal("text", str(value))
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            try:
                value = float(value)
            except (TypeError, ValueError):
                return None
            value = int(value) if value.is_integer() else value
        return Literal("number", value)
    if kind == "boolean":
        if isinstance(value, bool):
            return Literal("boolean", value)
        return {"true": Literal("boolean", True), "false": Literal("boolean", False)}.get(value)
    if kind == "date":
        return Literal("date", value) if isinstance(value, str) and _valid_date(value) else None
    if kind == "datetime":
        return Literal("datetime", value) if isinstance(value, str) and _valid_datetime(value) else None
    return Literal("url", value) if isinstance(value, str) and is_iri(value) else None


def _error_text(body: str) -> str:
    try:
        data = json.loads(body)
    except json.JSONDecodeError:
        return body.strip()
    if isinstance(data, dict):
        for key in ("description", "error", "message"):
            if isinstance(data.get(key), str):
                return data[key]
    return body.strip()


def lift_response(m: MappingDocument, resource_id: str, native_body: str,
                  native_status: int) -> EntityGraph:
    """Map a native response onto typed entity roots.

    Wildcard bindings produce one root per array element in order;
    whole-body bindings land on every root.  Absent native paths simply
    leave the property absent.  Error statuses yield a single fault node.
    """
    r = m.resource(resource_id)
    if native_status >= 400:
        g = new_graph()
        root = add_node(g, types=[r.descriptor.error_type], root=True)
        add_value(g, root, "description", Literal("text", _error_text(native_body)))
        return g

    try:
        data = json.loads(native_body)
    except json.JSONDecodeError as exc:
        raise NativeParseError(f"{resource_id}: response body is not JSON: {exc}") from exc

    wildcards = [b for b in r.output_bindings if b.wildcard]
    elements: list = []
    if wildcards:
        prefix = wildcards[0].split()[0]
        array = _read_native(data, prefix) if prefix else data
        if isinstance(array, list):
            elements = array
        sources = elements
    else:
        sources = [data]

    g = new_graph()
    roots = [add_node(g, types=list(r.result_types), root=True) for _ in sources]
    for root, element in zip(roots, sources):
        for b in r.output_bindings:
            if b.wildcard:
                value = _read_native(element, b.split()[1]) if b.split()[1] else element
            else:
                value = _read_native(data, b.native_path)
            if value is _MISS:
                continue
            lit = _to_literal(b.literal_kind, value)
            if lit is not None:
                g = set_path(g, root, b.schema_path, lit)
    return attach_potential_actions(m, resource_id, g, elements=sources)


def _kind_for_datatype(datatype: str) -> str:
    return {"Date": "date", "DateTime": "datetime", "Integer": "number",
            "Number": "number", "Boolean": "boolean", "URL": "url"}.get(datatype, "text")


def _strip_type_steps(path: str) -> str:
    return ".".join(PropertyPath.parse(path).property_names())


def _graft(dst: EntityGraph, src: EntityGraph) -> Ref:
    """Copy every node of `src` into `dst`; returns the copied first root."""
    extra = tuple(p for p in src.context.prefixes if not dst.context.has_prefix(p[0]))
    if extra:
        dst.context = Context(dst.context.base, dst.context.prefixes + extra)
    key_map: dict[str, Ref] = {}
    for old_key, node in src.nodes.items():
        key_map[old_key] = add_node(dst, types=node.types, id=node.id)
    for old_key, node in src.nodes.items():
        target = dst.node(key_map[old_key])
        for prop, values in node.properties.items():
            target.properties[prop] = [
                key_map[v.key] if isinstance(v, Ref) else v for v in values]
    return key_map[src.roots[0].key]


def attach_potential_actions(m: MappingDocument, resource_id: str, lifted: EntityGraph,
                             *, elements: list | None = None) -> EntityGraph:
    """Attach follow-up actions to every lifted root whose condition matches.

    `elements` aligns each root with the native element it was lifted
    from, for fieldEquals conditions and bindFields defaults.
    """
    r = m.resource(resource_id)
    if not r.response_actions:
        return lifted
    g = lifted.copy()
    v = m.vocabulary
    for i, root in enumerate(g.roots):
        element = elements[i] if elements is not None and i < len(elements) else None
        types = set()
        for t in g.node(root).types:
            types.add(t)
            if t in v.classes:
                types |= v.class_ancestors(t)
        for ra in r.response_actions:
            if ra.condition is not None:
                if ra.condition.node_type is not None and ra.condition.node_type not in types:
                    continue
                if ra.condition.field_equals is not None:
                    name, expected = ra.condition.field_equals
                    if element is None or _read_native(element, name) != expected:
                        continue
            target = m.resource(ra.action_ref)
            inputs = []
            for spec in target.descriptor.inputs:
                bound = spec
                for bf in ra.bind_fields:
                    if _strip_type_steps(bf.to_spec_default_path) != spec.path:
                        continue
                    raw = _read_native(element, bf.from_native_path) if element is not None else _MISS
                    if raw is _MISS:
                        continue
                    lit = _to_literal(_kind_for_datatype(spec.datatype), raw)
                    if lit is not None:
                        bound = replace(spec, default_value=lit)
                inputs.append(bound)
            # instance copies must be blank nodes: a shared @id would make
            # differently-bound copies collapse into one node on re-parse
            action = serialize_action(replace(target.descriptor, inputs=tuple(inputs), id=None))
            add_value(g, root, "potentialAction", _graft(g, action))
    return g
