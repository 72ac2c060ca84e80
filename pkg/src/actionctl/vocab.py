"""Vocabulary loading, entailment closure and closed-world validation.

A vocabulary is a flat list of class and property definitions.  Validation is
closed-world: a property value whose type is outside the declared range fails,
and so does any subject node that carries properties but no type at all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .graph import (
    EntityGraph,
    Literal,
    Node,
    Ref,
    ToolkitError,
    Value,
    _valid_date,
    _valid_datetime,
    is_iri,
)

# violation codes shared by the vocabulary and action validators
UNTYPED_SUBJECT = "UNTYPED_SUBJECT"
DOMAIN_VIOLATION = "DOMAIN_VIOLATION"
RANGE_VIOLATION = "RANGE_VIOLATION"
UNKNOWN_PROPERTY = "UNKNOWN_PROPERTY"
UNKNOWN_TYPE = "UNKNOWN_TYPE"
MISSING_REQUIRED = "MISSING_REQUIRED"
CONSTRAINT_VIOLATION = "CONSTRAINT_VIOLATION"
MISSING_PROMISED = "MISSING_PROMISED"

SPEC_SUFFIXES = ("-input", "-output")
PVS = "PropertyValueSpecification"


class VocabularyFormatError(ToolkitError):
    """Vocabulary document has the wrong shape."""


class DanglingReferenceError(ToolkitError):
    """A definition references a name that is never declared."""


class CycleError(ToolkitError):
    """Subclass or subproperty chains form a non-reflexive cycle."""


class UnknownTermError(ToolkitError):
    """Lookup of a class or property that is not declared."""


@dataclass(frozen=True)
class ClassDef:
    name: str
    sub_class_of: tuple[str, ...] = ()


@dataclass(frozen=True)
class PropertyDef:
    name: str
    sub_property_of: tuple[str, ...] = ()
    domain_includes: tuple[str, ...] = ()
    range_includes: tuple[str, ...] = ()


@dataclass
class Vocabulary:
    classes: dict[str, ClassDef]
    properties: dict[str, PropertyDef]
    _class_anc: dict[str, set[str]] = field(default_factory=dict, repr=False)
    _prop_anc: dict[str, set[str]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._class_anc = _ancestor_closure(
            {c.name: c.sub_class_of for c in self.classes.values()}, "subclass"
        )
        self._prop_anc = _ancestor_closure(
            {p.name: p.sub_property_of for p in self.properties.values()}, "subproperty"
        )

    def class_ancestors(self, name: str) -> set[str]:
        """All superclasses of `name`, including itself."""
        if name not in self.classes:
            raise UnknownTermError(f"unknown class {name!r}")
        return self._class_anc[name]

    def property_ancestors(self, name: str) -> set[str]:
        """All superproperties of `name`, including itself."""
        if name not in self.properties:
            raise UnknownTermError(f"unknown property {name!r}")
        return self._prop_anc[name]


def _ancestor_closure(parents: dict[str, tuple[str, ...]], label: str) -> dict[str, set[str]]:
    # reflexive self-loops are tolerated; every other cycle is an error
    done: dict[str, set[str]] = {}
    state: dict[str, int] = {}  # 1 = visiting, 2 = finished

    def visit(name: str) -> set[str]:
        if state.get(name) == 2:
            return done[name]
        if state.get(name) == 1:
            raise CycleError(f"{label} cycle through {name!r}")
        state[name] = 1
        anc = {name}
        for parent in parents.get(name, ()):
            if parent == name:
                continue
            anc |= visit(parent)
        state[name] = 2
        done[name] = anc
        return anc

    for n in parents:
        visit(n)
    return done


def _str_list(raw, where: str) -> tuple[str, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise VocabularyFormatError(f"{where} must be an array of strings")
    return tuple(raw)


def load_vocabulary(*documents: str) -> Vocabulary:
    """Load and merge one or more vocabulary documents, then validate them."""
    if not documents:
        raise VocabularyFormatError("at least one vocabulary document is required")
    classes: dict[str, ClassDef] = {}
    properties: dict[str, PropertyDef] = {}
    for document in documents:
        try:
            data = json.loads(document)
        except json.JSONDecodeError as exc:
            raise VocabularyFormatError(f"not valid JSON: {exc}") from exc
        if not isinstance(data, dict) or not isinstance(data.get("classes"), list) \
                or not isinstance(data.get("properties"), list):
            raise VocabularyFormatError("expected an object with classes and properties arrays")
        for entry in data["classes"]:
            if not isinstance(entry, dict) or not isinstance(entry.get("name"), str):
                raise VocabularyFormatError(f"bad class entry {entry!r}")
            name = entry["name"]
            if name in classes or name in properties:
                raise VocabularyFormatError(f"duplicate definition of {name!r}")
            classes[name] = ClassDef(name, _str_list(entry.get("subClassOf"), f"{name}.subClassOf"))
        for entry in data["properties"]:
            if not isinstance(entry, dict) or not isinstance(entry.get("name"), str):
                raise VocabularyFormatError(f"bad property entry {entry!r}")
            name = entry["name"]
            if name in properties or name in classes:
                raise VocabularyFormatError(f"duplicate definition of {name!r}")
            ranges = _str_list(entry.get("rangeIncludes"), f"{name}.rangeIncludes")
            if not ranges:
                raise VocabularyFormatError(f"property {name!r} needs at least one rangeIncludes")
            properties[name] = PropertyDef(
                name,
                _str_list(entry.get("subPropertyOf"), f"{name}.subPropertyOf"),
                _str_list(entry.get("domainIncludes"), f"{name}.domainIncludes"),
                ranges,
            )

    for c in classes.values():
        for parent in c.sub_class_of:
            if parent not in classes:
                raise DanglingReferenceError(f"{c.name} subClassOf undeclared {parent!r}")
    for p in properties.values():
        for parent in p.sub_property_of:
            if parent not in properties:
                raise DanglingReferenceError(f"{p.name} subPropertyOf undeclared {parent!r}")
        for d in p.domain_includes:
            if d not in classes:
                raise DanglingReferenceError(f"{p.name} domainIncludes undeclared {d!r}")
        for r in p.range_includes:
            if r not in classes:
                raise DanglingReferenceError(f"{p.name} rangeIncludes undeclared {r!r}")

    return Vocabulary(classes, properties)


def load_vocabulary_files(paths) -> Vocabulary:
    texts = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            texts.append(fh.read())
    return load_vocabulary(*texts)


def is_subclass_of(v: Vocabulary, a: str, b: str) -> bool:
    """Reflexive-transitive subclass check."""
    if b not in v.classes:
        raise UnknownTermError(f"unknown class {b!r}")
    return b in v.class_ancestors(a)


def is_subproperty_of(v: Vocabulary, a: str, b: str) -> bool:
    """Reflexive-transitive subproperty check."""
    if b not in v.properties:
        raise UnknownTermError(f"unknown property {b!r}")
    return b in v.property_ancestors(a)


def _is_spec_key(name: str) -> bool:
    return any(name.endswith(s) and len(name) > len(s) for s in SPEC_SUFFIXES)


def entail_closure(g: EntityGraph, v: Vocabulary, *, strict: bool = True) -> EntityGraph:
    """Extend g with everything the vocabulary entails: inherited types and
    values copied up to superproperties.  Idempotent and monotone."""
    out = g.copy()
    for node in out.nodes.values():
        for t in list(node.types):
            if t not in v.classes:
                if strict:
                    raise UnknownTermError(f"unknown type {t!r}")
                continue
            for anc in sorted(v.class_ancestors(t)):
                if anc not in node.types:
                    node.types.append(anc)
        additions: list[tuple[str, Value]] = []
        for prop, values in node.properties.items():
            if _is_spec_key(prop):
                continue  # input/output constraint attachments, not data triples
            if prop not in v.properties:
                if strict:
                    raise UnknownTermError(f"unknown property {prop!r}")
                continue
            for anc in sorted(v.property_ancestors(prop)):
                if anc == prop:
                    continue
                for value in values:
                    additions.append((anc, value))
        for prop, value in additions:
            bucket = node.properties.setdefault(prop, [])
            if value not in bucket:
                bucket.append(value)
    return out


def check_property_applicability(v: Vocabulary, node: Node, p: str) -> bool:
    """True iff some type of the node falls under the property's domain."""
    if p not in v.properties:
        raise UnknownTermError(f"unknown property {p!r}")
    domains = v.properties[p].domain_includes
    for t in node.types:
        if t not in v.classes:
            continue
        anc = v.class_ancestors(t)
        if any(d in anc for d in domains):
            return True
    return False


def _literal_datatypes(lit: Literal) -> set[str]:
    if lit.kind == "text":
        names = {"Text"}
        if is_iri(lit.value):
            names.add("URL")
        if _valid_date(lit.value):
            names.add("Date")
        if _valid_datetime(lit.value):
            names.add("DateTime")
        return names
    if lit.kind == "url":
        return {"URL"}
    if lit.kind == "number":
        names = {"Number"}
        if isinstance(lit.value, int) or float(lit.value).is_integer():
            names.add("Integer")
        return names
    if lit.kind == "boolean":
        return {"Boolean"}
    if lit.kind == "date":
        return {"Date"}
    return {"DateTime"}


def _subclass_ok(v: Vocabulary, a: str, b: str) -> bool:
    if a == b:
        return True
    if a in v.classes and b in v.classes:
        return b in v.class_ancestors(a)
    return False


def check_value_admissibility(v: Vocabulary, g: EntityGraph, p: str, value: Value) -> bool:
    """True iff the value's datatype or node type falls under the range."""
    if p not in v.properties:
        raise UnknownTermError(f"unknown property {p!r}")
    ranges = v.properties[p].range_includes
    if isinstance(value, Literal):
        kinds = _literal_datatypes(value)
        return any(_subclass_ok(v, k, r) for k in kinds for r in ranges)
    node = g.node(value)
    if not node.types:
        return False  # closed world: untyped node values never satisfy a range
    return any(_subclass_ok(v, t, r) for t in node.types for r in ranges)


@dataclass(frozen=True)
class Violation:
    code: str
    node: str | None
    detail: str
    prop: str | None = None

    def to_dict(self) -> dict:
        out = {"code": self.code, "node": self.node, "detail": self.detail}
        if self.prop is not None:
            out["property"] = self.prop
        return out


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}

    def __str__(self) -> str:
        if self.ok:
            return "no violations"
        return "\n".join(f"{v.code} at {v.node or '-'}{' ' + v.prop if v.prop else ''}: {v.detail}"
                         for v in self.violations)


def validate_graph(g: EntityGraph, v: Vocabulary) -> ValidationReport:
    """Closed-world validation of every node reachable from the roots.

    Runs the entailment closure first so that inherited types and properties
    are checked, then reports violations in deterministic traversal order.
    """
    closed = entail_closure(g, v, strict=False)
    report = ValidationReport()
    visited: set[str] = set()

    def visit(ref: Ref, assumed: tuple[str, ...]) -> None:
        if ref.key in visited:
            return
        visited.add(ref.key)
        node = closed.node(ref)
        types = list(node.types) + [t for t in assumed if t not in node.types]

        for t in node.types:
            if t not in v.classes:
                report.violations.append(Violation(UNKNOWN_TYPE, ref.key, f"type {t!r} is not declared", t))
        known_types = [t for t in types if t in v.classes]
        untyped = bool(node.properties) and not types
        if untyped:
            report.violations.append(Violation(
                UNTYPED_SUBJECT, ref.key, "node carries properties but no type"))

        effective = Node(node.id, known_types, node.properties)
        for prop, values in node.properties.items():
            if _is_spec_key(prop):
                base, _, direction = prop.rpartition("-")
                if base not in v.properties:
                    report.violations.append(Violation(
                        UNKNOWN_PROPERTY, ref.key, f"property {base!r} is not declared", prop))
                elif not untyped and not check_property_applicability(v, effective, base):
                    report.violations.append(Violation(
                        DOMAIN_VIOLATION, ref.key,
                        f"{base!r} ({direction} constraint) does not apply to types {types}", prop))
                for value in values:
                    if isinstance(value, Ref):
                        # a bare constraint object is implicitly a value spec
                        visit(value, (PVS,))
                continue
            if prop not in v.properties:
                report.violations.append(Violation(
                    UNKNOWN_PROPERTY, ref.key, f"property {prop!r} is not declared", prop))
                for value in values:
                    if isinstance(value, Ref):
                        visit(value, ())
                continue
            if not untyped and not check_property_applicability(v, effective, prop):
                report.violations.append(Violation(
                    DOMAIN_VIOLATION, ref.key, f"{prop!r} does not apply to types {types}", prop))
            for value in values:
                if not check_value_admissibility(v, closed, prop, value):
                    detail = (f"value of {prop!r} is outside the declared range "
                              f"{list(v.properties[prop].range_includes)}")
                    report.violations.append(Violation(RANGE_VIOLATION, ref.key, detail, prop))
                if isinstance(value, Ref):
                    visit(value, ())

    for root in closed.roots:
        visit(root, ())
    return report
