"""Action annotation model.

Turns annotated action documents into structured descriptors and back:
entry points, `-input`/`-output` property value specifications, the
authentication extension carried on `instrument`, and `<verb>.<object>`
intent names with their slots.

Spec paths are dot-joined property names relative to the action root
(`object.checkinTime`).  A descriptor also remembers the types of the
intermediate nodes those paths ran through (`scaffold_types`) so a request
skeleton can be rebuilt with fully typed entities.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .graph import (
    WEBAPI_VOCAB,
    Context,
    EntityGraph,
    Literal,
    Node,
    Ref,
    ToolkitError,
    Value,
    add_node,
    add_value,
    get_path,
    new_graph,
)
from .vocab import (
    CONSTRAINT_VIOLATION,
    MISSING_PROMISED,
    MISSING_REQUIRED,
    PVS,
    ValidationReport,
    Violation,
    Vocabulary,
    is_subclass_of,
    validate_graph,
)


class NotAnActionError(ToolkitError):
    """The node handed to the parser is not typed as an Action subclass."""


class MissingTargetError(ToolkitError):
    """The action node carries no invocable target."""


class MalformedSpecError(ToolkitError):
    """A value specification, entry point, or auth block cannot be read."""


class ConflictingSpecsError(ToolkitError):
    """Two specifications with the same direction claim the same path."""


HTTP_METHODS = ("GET", "POST", "PUT", "PATCH", "DELETE")

AUTH_BASE = "webapi:Authentication"
AUTH_TOKEN = "webapi:TokenAuthentication"
AUTH_BASIC = "webapi:HTTPBasicAuthentication"
AUTH_CUSTOM = "webapi:CustomAuthentication"

# when a property's range admits several datatypes the earliest entry wins
_DATATYPES = ("Date", "DateTime", "Integer", "Number", "Boolean", "URL", "Text")

# edges never walked when collecting value specifications
_NON_DATA_EDGES = frozenset({"target", "instrument", "error", "potentialAction"})

_PLACEHOLDER_RE = re.compile(r"\{([^{}]+)\}")


@dataclass(frozen=True)
class EntryPoint:
    """Invocation target: URL template plus HTTP method and media types."""

    url_template: str
    http_method: str = "GET"
    encoding_type: str | None = None
    content_type: str | None = None

    def placeholders(self) -> list[str]:
        """Placeholder names in the URL template, `{name}` and `{?a,b}` forms."""
        names: list[str] = []
        for expr in _PLACEHOLDER_RE.findall(self.url_template):
            expr = expr.lstrip("?&;+#/.")
            names.extend(part.strip() for part in expr.split(",") if part.strip())
        return names


@dataclass(frozen=True)
class PropertyValueSpec:
    """One `-input`/`-output` declaration, path relative to the action root."""

    path: str
    direction: str  # "input" | "output"
    value_required: bool = False
    value_name: str | None = None
    default_value: Literal | None = None
    min_value: float | None = None
    max_value: float | None = None
    value_min_length: int | None = None
    value_max_length: int | None = None
    value_pattern: str | None = None
    multiple_values: bool = False
    datatype: str = "Text"  # derived from the base property's range

    @property
    def base_property(self) -> str:
        return self.path.rpartition(".")[2]

    @property
    def prompt_name(self) -> str:
        return self.value_name or self.base_property


@dataclass(frozen=True)
class AuthenticationSpec:
    """How to authenticate invocations: token, basic, custom, or none."""

    method: str = "none"
    token: str | None = None
    placement: str | None = None  # custom: header | body | url
    name: str | None = None
    value: str | None = None


@dataclass(frozen=True)
class SlotSpec:
    """One dialog slot: where the value lands, how it is asked, what kind."""

    path: str
    name: str
    datatype: str


@dataclass(frozen=True)
class IntentDescriptor:
    name: str
    action_id: str | None
    required_slots: tuple[SlotSpec, ...]
    optional_slots: tuple[SlotSpec, ...]


@dataclass(frozen=True)
class ActionDescriptor:
    """Parsed action annotation, immutable and safe to share.

    `scaffold_types` maps each proper prefix of a spec path (except the
    bare `object`/`result`, covered by their own fields) to the types of
    the node found there, so skeleton requests recreate the same shape.
    """

    action_type: str
    entry_point: EntryPoint
    id: str | None = None
    object_types: tuple[str, ...] = ()
    result_types: tuple[str, ...] = ()
    inputs: tuple[PropertyValueSpec, ...] = ()
    outputs: tuple[PropertyValueSpec, ...] = ()
    auth: AuthenticationSpec = AuthenticationSpec()
    error_type: str = "Thing"
    scaffold_types: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def input_at(self, path: str) -> PropertyValueSpec | None:
        for spec in self.inputs:
            if spec.path == path:
                return spec
        return None


def _first_ref(values: list[Value]) -> Ref | None:
    for v in values:
        if isinstance(v, Ref):
            return v
    return None


def _single_literal(node: Node, prop: str, kinds: tuple[str, ...], where: str):
    values = node.properties.get(prop, [])
    if not values:
        return None
    if len(values) > 1:
        raise MalformedSpecError(f"{where}: {prop} given more than once")
    v = values[0]
    if not isinstance(v, Literal) or v.kind not in kinds:
        raise MalformedSpecError(f"{where}: {prop} must be a {' or '.join(kinds)} literal")
    return v.value


def _parse_entry_point(g: EntityGraph, action: Node) -> EntryPoint:
    values = action.properties.get("target", [])
    if not values:
        raise MissingTargetError("action has no target entry point")
    ref = _first_ref(values)
    if ref is None:
        # a bare URL literal is an entry point with defaults
        v = values[0]
        if isinstance(v, Literal) and v.kind in ("url", "text"):
            return EntryPoint(url_template=str(v.value))
        raise MissingTargetError("target is neither an entry point node nor a URL")
    node = g.node(ref)
    template = _single_literal(node, "urlTemplate", ("text", "url"), "entry point")
    if template is None:
        raise MalformedSpecError("entry point lacks a urlTemplate")
    method = _single_literal(node, "httpMethod", ("text",), "entry point") or "GET"
    method = method.upper()
    if method not in HTTP_METHODS:
        raise MalformedSpecError(f"entry point: unsupported httpMethod {method!r}")
    return EntryPoint(
        url_template=str(template),
        http_method=method,
        encoding_type=_single_literal(node, "encodingType", ("text",), "entry point"),
        content_type=_single_literal(node, "contentType", ("text",), "entry point"),
    )


def _int_field(raw, prop: str, where: str) -> int | None:
    if raw is None:
        return None
    if isinstance(raw, bool) or float(raw) != int(raw):
        raise MalformedSpecError(f"{where}: {prop} must be a non-negative integer")
    n = int(raw)
    if n < 0:
        raise MalformedSpecError(f"{where}: {prop} must be a non-negative integer")
    return n


def _parse_spec_value(g: EntityGraph, path: str, direction: str, value: Value) -> PropertyValueSpec:
    where = f"spec at {path}"
    if isinstance(value, Literal):
        if value.kind == "text" and value.value == "required":
            return PropertyValueSpec(path, direction, value_required=True)
        raise MalformedSpecError(f'{where}: literal form must be the string "required"')
    node = g.node(value)
    for t in node.types:
        if t != PVS:
            raise MalformedSpecError(f"{where}: value spec node typed {t!r}")
    required = _single_literal(node, "valueRequired", ("boolean",), where)
    required = bool(required) if required is not None else False
    if direction == "output":
        return PropertyValueSpec(path, direction, value_required=required)

    min_value = _single_literal(node, "minValue", ("number",), where)
    max_value = _single_literal(node, "maxValue", ("number",), where)
    if min_value is not None and max_value is not None and min_value > max_value:
        raise MalformedSpecError(f"{where}: minValue exceeds maxValue")
    min_len = _int_field(_single_literal(node, "valueMinLength", ("number",), where),
                         "valueMinLength", where)
    max_len = _int_field(_single_literal(node, "valueMaxLength", ("number",), where),
                         "valueMaxLength", where)
    if min_len is not None and max_len is not None and min_len > max_len:
        raise MalformedSpecError(f"{where}: valueMinLength exceeds valueMaxLength")
    pattern = _single_literal(node, "valuePattern", ("text",), where)
    if pattern is not None:
        try:
            re.compile(pattern)
        except re.error as exc:
            raise MalformedSpecError(f"{where}: bad valuePattern: {exc}") from exc
    default_values = node.properties.get("defaultValue", [])
    if len(default_values) > 1:
        raise MalformedSpecError(f"{where}: defaultValue given more than once")
    default = default_values[0] if default_values else None
    if default is not None and not isinstance(default, Literal):
        raise MalformedSpecError(f"{where}: defaultValue must be a literal")
    multiple = _single_literal(node, "multipleValues", ("boolean",), where)
    return PropertyValueSpec(
        path,
        direction,
        value_required=required,
        value_name=_single_literal(node, "valueName", ("text",), where),
        default_value=default,
        min_value=min_value,
        max_value=max_value,
        value_min_length=min_len,
        value_max_length=max_len,
        value_pattern=pattern,
        multiple_values=bool(multiple) if multiple is not None else False,
    )


def _collect_specs(g: EntityGraph, root: Ref) -> list[PropertyValueSpec]:
    specs: list[PropertyValueSpec] = []
    visited: set[str] = set()

    def walk(ref: Ref, prefix: str) -> None:
        if ref.key in visited:
            return
        visited.add(ref.key)
        node = g.node(ref)
        for prop, values in node.properties.items():
            skip = _NON_DATA_EDGES if not prefix else {"potentialAction"}
            if prop in skip:
                continue
            if prop.endswith("-input") or prop.endswith("-output"):
                base, _, direction = prop.rpartition("-")
                if not base:
                    continue
                path = f"{prefix}.{base}" if prefix else base
                for value in values:
                    specs.append(_parse_spec_value(g, path, direction, value))
                continue
            for value in values:
                if isinstance(value, Ref):
                    walk(value, f"{prefix}.{prop}" if prefix else prop)

    walk(root, "")
    return specs


def _derive_datatype(v: Vocabulary, prop: str) -> str:
    """First declared datatype range wins; vocabulary order is intentional."""
    if prop not in v.properties:
        return "Text"
    for r in v.properties[prop].range_includes:
        for dt in _DATATYPES:
            if r == dt or (dt in v.classes and r in v.classes and is_subclass_of(v, r, dt)):
                return dt
    return "Text"


def _parse_auth(g: EntityGraph, v: Vocabulary, action: Node) -> AuthenticationSpec:
    for value in action.properties.get("instrument", []):
        if not isinstance(value, Ref):
            continue
        node = g.node(value)
        auth_types = [t for t in node.types
                      if t in v.classes and is_subclass_of(v, t, AUTH_BASE)]
        if not auth_types:
            continue
        t = auth_types[0]

        def read(prop: str) -> str | None:
            raw = _single_literal(node, prop, ("text",), "auth spec")
            return str(raw) if raw is not None else None

        if is_subclass_of(v, t, AUTH_TOKEN):
            return AuthenticationSpec(method="token", token=read("webapi:bearerToken"))
        if is_subclass_of(v, t, AUTH_BASIC):
            return AuthenticationSpec(method="basic", token=read("value"))
        if is_subclass_of(v, t, AUTH_CUSTOM):
            placement = read("webapi:placement")
            name, val = read("name"), read("value")
            if placement not in ("header", "body", "url") or not name or val is None:
                raise MalformedSpecError(
                    "custom auth needs name, value, and a header/body/url placement")
            return AuthenticationSpec(method="custom", placement=placement, name=name, value=val)
        raise MalformedSpecError(f"unrecognized authentication type {t!r}")
    return AuthenticationSpec()


def parse_action(g: EntityGraph, root: Ref, v: Vocabulary) -> ActionDescriptor:
    """Read one action node into a descriptor.

    Specs are gathered from `-input`/`-output` keys anywhere in the data
    subtrees under the action and returned sorted by path; their paths are
    relative to the action root.
    """
    node = g.node(root)
    action_type = node.types[0] if node.types else None
    if (action_type is None or action_type not in v.classes
            or not is_subclass_of(v, action_type, "Action")):
        raise NotAnActionError(f"node is typed {node.types or 'nothing'}, not an Action")

    entry_point = _parse_entry_point(g, node)
    specs = _collect_specs(g, root)
    inputs = tuple(sorted((s for s in specs if s.direction == "input"), key=lambda s: s.path))
    outputs = tuple(sorted((s for s in specs if s.direction == "output"), key=lambda s: s.path))
    for group in (inputs, outputs):
        paths = [s.path for s in group]
        for path in paths:
            if paths.count(path) > 1:
                raise ConflictingSpecsError(f"duplicate spec for path {path}")
    inputs = tuple(replace(s, datatype=_derive_datatype(v, s.base_property)) for s in inputs)

    def types_at(prop: str) -> tuple[str, ...]:
        ref = _first_ref(node.properties.get(prop, []))
        return tuple(g.node(ref).types) if ref is not None else ()

    prefixes: set[str] = set()
    for spec in inputs + outputs:
        parts = spec.path.split(".")
        for i in range(1, len(parts)):
            prefixes.add(".".join(parts[:i]))
    scaffold = []
    for prefix in sorted(prefixes - {"object", "result"}):
        ref = _first_ref(get_path(g, root, prefix))
        scaffold.append((prefix, tuple(g.node(ref).types) if ref is not None else ()))

    error_ref = _first_ref(node.properties.get("error", []))
    error_node = g.node(error_ref) if error_ref is not None else None
    descriptor = ActionDescriptor(
        action_type=action_type,
        entry_point=entry_point,
        id=node.id,
        object_types=types_at("object"),
        result_types=types_at("result"),
        inputs=inputs,
        outputs=outputs,
        auth=_parse_auth(g, v, node),
        error_type=error_node.types[0] if error_node and error_node.types else "Thing",
        scaffold_types=tuple(scaffold),
    )

    names = {s.value_name for s in inputs if s.value_name}
    for placeholder in entry_point.placeholders():
        if placeholder not in names:
            raise MalformedSpecError(
                f"urlTemplate placeholder {{{placeholder}}} has no input spec named {placeholder!r}")
    return descriptor


def action_roots(g: EntityGraph, v: Vocabulary) -> list[Ref]:
    """Roots of `g` whose first type is an Action subclass."""
    out = []
    for ref in g.roots:
        types = g.node(ref).types
        if types and types[0] in v.classes and is_subclass_of(v, types[0], "Action"):
            out.append(ref)
    return out


def _ensure_chain(g: EntityGraph, root: Ref, prefix: str,
                  made: dict[str, Ref], types_for: dict[str, tuple[str, ...]]) -> Ref:
    if prefix in made:
        return made[prefix]
    head, _, last = prefix.rpartition(".")
    parent = _ensure_chain(g, root, head, made, types_for) if head else root
    ref = add_node(g, types=types_for.get(prefix, ()))
    add_value(g, parent, last, ref)
    made[prefix] = ref
    return ref


def serialize_action(d: ActionDescriptor) -> EntityGraph:
    """Emit the annotation document for a descriptor.

    `parse_action` on the result returns an equal descriptor.
    """
    context = Context() if d.auth.method == "none" \
        else Context(prefixes=(("webapi", WEBAPI_VOCAB),))
    g = new_graph(context)
    root = add_node(g, types=[d.action_type], id=d.id, root=True)

    ep = add_node(g, types=["EntryPoint"])
    add_value(g, root, "target", ep)
    add_value(g, ep, "urlTemplate", Literal("text", d.entry_point.url_template))
    add_value(g, ep, "httpMethod", Literal("text", d.entry_point.http_method))
    if d.entry_point.encoding_type is not None:
        add_value(g, ep, "encodingType", Literal("text", d.entry_point.encoding_type))
    if d.entry_point.content_type is not None:
        add_value(g, ep, "contentType", Literal("text", d.entry_point.content_type))

    types_for = {"object": d.object_types, "result": d.result_types}
    types_for.update(dict(d.scaffold_types))
    made: dict[str, Ref] = {}
    if d.object_types:
        _ensure_chain(g, root, "object", made, types_for)
    if d.result_types:
        _ensure_chain(g, root, "result", made, types_for)

    for spec in d.inputs + d.outputs:
        head, _, base = spec.path.rpartition(".")
        owner = _ensure_chain(g, root, head, made, types_for) if head else root
        sn = add_node(g, types=[PVS])
        add_value(g, owner, f"{base}-{spec.direction}", sn)
        add_value(g, sn, "valueRequired", Literal("boolean", spec.value_required))
        if spec.direction == "output":
            continue
        if spec.value_name is not None:
            add_value(g, sn, "valueName", Literal("text", spec.value_name))
        if spec.default_value is not None:
            add_value(g, sn, "defaultValue", spec.default_value)
        if spec.min_value is not None:
            add_value(g, sn, "minValue", Literal("number", spec.min_value))
        if spec.max_value is not None:
            add_value(g, sn, "maxValue", Literal("number", spec.max_value))
        if spec.value_min_length is not None:
            add_value(g, sn, "valueMinLength", Literal("number", spec.value_min_length))
        if spec.value_max_length is not None:
            add_value(g, sn, "valueMaxLength", Literal("number", spec.value_max_length))
        if spec.value_pattern is not None:
            add_value(g, sn, "valuePattern", Literal("text", spec.value_pattern))
        if spec.multiple_values:
            add_value(g, sn, "multipleValues", Literal("boolean", True))

    if d.auth.method != "none":
        an_type = {"token": AUTH_TOKEN, "basic": AUTH_BASIC, "custom": AUTH_CUSTOM}[d.auth.method]
        an = add_node(g, types=[an_type])
        add_value(g, root, "instrument", an)
        if d.auth.method == "token" and d.auth.token is not None:
            add_value(g, an, "webapi:bearerToken", Literal("text", d.auth.token))
        if d.auth.method == "basic" and d.auth.token is not None:
            add_value(g, an, "value", Literal("text", d.auth.token))
        if d.auth.method == "custom":
            add_value(g, an, "name", Literal("text", d.auth.name))
            add_value(g, an, "value", Literal("text", d.auth.value))
            add_value(g, an, "webapi:placement", Literal("text", d.auth.placement))

    if d.error_type != "Thing":
        err = add_node(g, types=[d.error_type])
        add_value(g, root, "error", err)
    return g


def build_request_skeleton(d: ActionDescriptor, *, include_defaults: bool = True) -> EntityGraph:
    """Typed request graph ready for slot filling: the action root plus a
    typed node chain for every input path, defaults pre-filled."""
    g = new_graph()
    root = add_node(g, types=[d.action_type], root=True)
    types_for = {"object": d.object_types, "result": d.result_types}
    types_for.update(dict(d.scaffold_types))
    made: dict[str, Ref] = {}
    for spec in d.inputs:
        head, _, _ = spec.path.rpartition(".")
        if head:
            _ensure_chain(g, root, head, made, types_for)
        if include_defaults and spec.default_value is not None:
            owner = made[head] if head else root
            add_value(g, owner, spec.base_property, spec.default_value)
    return g


def _check_constraints(spec: PropertyValueSpec, values: list[Value],
                       root_key: str) -> list[Violation]:
    out = []

    def bad(detail: str) -> None:
        out.append(Violation(CONSTRAINT_VIOLATION, root_key, detail, spec.path))

    if not spec.multiple_values and len(values) > 1:
        bad(f"{spec.path} admits a single value, got {len(values)}")
    for value in values:
        if not isinstance(value, Literal):
            continue
        if spec.min_value is not None or spec.max_value is not None:
            if value.kind != "number":
                bad(f"{spec.path} has numeric bounds but a non-numeric value")
            elif spec.min_value is not None and value.value < spec.min_value:
                bad(f"{spec.path} below minValue {spec.min_value}")
            elif spec.max_value is not None and value.value > spec.max_value:
                bad(f"{spec.path} above maxValue {spec.max_value}")
        lex = value.lexical
        if spec.value_min_length is not None and len(lex) < spec.value_min_length:
            bad(f"{spec.path} shorter than valueMinLength {spec.value_min_length}")
        if spec.value_max_length is not None and len(lex) > spec.value_max_length:
            bad(f"{spec.path} longer than valueMaxLength {spec.value_max_length}")
        if spec.value_pattern is not None and not re.fullmatch(spec.value_pattern, lex):
            bad(f"{spec.path} does not match pattern {spec.value_pattern!r}")
    return out


def validate_request_inputs(d: ActionDescriptor, filled: EntityGraph,
                            v: Vocabulary) -> ValidationReport:
    """Spec-level checks for a filled request, then full graph validation."""
    report = ValidationReport()
    root = filled.roots[0]
    for spec in d.inputs:
        values = get_path(filled, root, spec.path)
        if not values:
            if spec.value_required:
                report.violations.append(Violation(
                    MISSING_REQUIRED, root.key,
                    f"required input missing at path {spec.path}", spec.path))
            continue
        report.violations.extend(_check_constraints(spec, values, root.key))
    report.violations.extend(validate_graph(filled, v).violations)
    return report


def validate_response_outputs(d: ActionDescriptor, response: EntityGraph,
                              v: Vocabulary) -> ValidationReport:
    """Check every promised output path is present on the response roots."""
    report = ValidationReport()
    promised = [s for s in d.outputs if s.value_required]

    def result_relative(path: str) -> str | None:
        head, _, rest = path.partition(".")
        if head == "result":
            return rest or None
        return path

    if not response.roots:
        for spec in promised:
            report.violations.append(Violation(
                MISSING_PROMISED, None,
                f"promised output {spec.path} missing from empty response", spec.path))
        return report
    for root in response.roots:
        for spec in promised:
            rel = result_relative(spec.path)
            if rel is None or not get_path(response, root, rel):
                report.violations.append(Violation(
                    MISSING_PROMISED, root.key,
                    f"promised output {spec.path} missing from response", spec.path))
    return report


def extract_intent(d: ActionDescriptor) -> IntentDescriptor:
    """`<verb>.<object>` intent name plus slots from the input specs."""
    verb = d.action_type.removesuffix("Action").lower() or "act"
    obj = d.object_types[0].lower() if d.object_types else "thing"

    def slots(required: bool) -> tuple[SlotSpec, ...]:
        return tuple(SlotSpec(s.path, s.prompt_name, s.datatype)
                     for s in d.inputs if s.value_required is required)

    return IntentDescriptor(f"{verb}.{obj}", d.id, slots(True), slots(False))
