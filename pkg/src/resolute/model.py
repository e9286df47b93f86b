"""Architecture models: a small AADL-like language, its instance tree, and queries.

A model file holds exactly one top-level component::

    system UAV {
      processor FMU { }
      process Main_Loop {
        thread MC { in port cmd }
        property OS = "seL4"
        resolute { prove only_receive_decrypt(MC) }
      }
    }

Every element is addressed by its qualified path (``UAV.Main_Loop.MC``).
References to elements are small frozen value objects holding that path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .syntax import ParseError, Pos, Token, TokenStream, tokenize

COMPONENT_KINDS = ("system", "process", "thread", "processor", "memory", "bus", "device")


class ModelError(Exception):
    """Semantic error in a model: duplicate names, dangling references."""

    def __init__(self, message: str, path: str | None = None, pos: Pos | None = None,
                 filename: str | None = None):
        self.message = message
        self.path = path
        self.pos = pos
        self.filename = filename
        super().__init__(str(self))

    def __str__(self) -> str:
        where = f"{self.filename or '<input>'}:{self.pos}: " if self.pos else ""
        at = f" (at {self.path})" if self.path else ""
        return f"{where}{self.message}{at}"


class ResolveError(ModelError):
    pass


@dataclass(frozen=True, order=True)
class ComponentRef:
    path: str

    def __str__(self) -> str:
        return self.path


@dataclass(frozen=True, order=True)
class FeatureRef:
    path: str

    def __str__(self) -> str:
        return self.path


@dataclass(frozen=True, order=True)
class ConnectionRef:
    path: str

    def __str__(self) -> str:
        return self.path


Ref = Union[ComponentRef, FeatureRef, ConnectionRef]
MODEL_REF_TYPES = (ComponentRef, FeatureRef, ConnectionRef)


@dataclass(frozen=True)
class PropertyValue:
    """One property association value, as written in the model."""

    tag: str  # string | integer | real | boolean | ref | list
    value: object

    def __str__(self) -> str:
        return render_property_value(self)


@dataclass
class Feature:
    name: str
    direction: str  # "in" | "out"
    owner: ComponentRef

    @property
    def path(self) -> str:
        return f"{self.owner.path}.{self.name}"

    @property
    def ref(self) -> FeatureRef:
        return FeatureRef(self.path)


@dataclass
class Connection:
    name: str
    owner: ComponentRef
    source: FeatureRef
    destination: FeatureRef
    properties: dict[str, PropertyValue] = field(default_factory=dict)
    source_text: str = ""
    destination_text: str = ""

    @property
    def path(self) -> str:
        return f"{self.owner.path}.{self.name}"

    @property
    def ref(self) -> ConnectionRef:
        return ConnectionRef(self.path)


@dataclass(frozen=True)
class ProveArg:
    """A prove-directive argument as written: a path or a literal."""

    tag: str  # path | string | integer | real | boolean
    value: object

    def __str__(self) -> str:
        if self.tag == "path":
            return str(self.value)
        return render_property_value(PropertyValue(self.tag, self.value))


@dataclass(frozen=True)
class ProveDirective:
    component: ComponentRef
    claim: str
    args: tuple[ProveArg, ...]
    pos: Pos | None = field(default=None, compare=False)

    @property
    def text(self) -> str:
        return f"{self.claim}({', '.join(str(a) for a in self.args)})"


@dataclass
class Component:
    name: str
    kind: str
    path: str
    parent: ComponentRef | None = None
    subcomponents: list[ComponentRef] = field(default_factory=list)
    features: list[Feature] = field(default_factory=list)
    properties: dict[str, PropertyValue] = field(default_factory=dict)
    connections: list[ConnectionRef] = field(default_factory=list)
    proves: list[ProveDirective] = field(default_factory=list)
    # declaration order of all items, for the pretty-printer
    items: list[tuple[str, str]] = field(default_factory=list, repr=False)

    @property
    def ref(self) -> ComponentRef:
        return ComponentRef(self.path)


@dataclass
class ModelInstance:
    root: ComponentRef
    components: dict[str, Component]
    connections: dict[str, Connection]
    features: dict[str, Feature]
    prove_directives: list[ProveDirective]
    # element paths in textual order, per category, for deterministic enumeration
    order: dict[str, list[Ref]] = field(default_factory=dict, repr=False)

    def component(self, ref: ComponentRef | str) -> Component:
        return self.components[ref.path if isinstance(ref, ComponentRef) else ref]

    def connection(self, ref: ConnectionRef | str) -> Connection:
        return self.connections[ref.path if isinstance(ref, ConnectionRef) else ref]

    def feature(self, ref: FeatureRef | str) -> Feature:
        return self.features[ref.path if isinstance(ref, FeatureRef) else ref]

    def kind_of(self, ref: Ref) -> str:
        if isinstance(ref, ComponentRef):
            return self.components[ref.path].kind
        if isinstance(ref, ConnectionRef):
            return "connection"
        return "feature"

    def contains(self, ref: Ref) -> bool:
        if isinstance(ref, ComponentRef):
            return ref.path in self.components
        if isinstance(ref, ConnectionRef):
            return ref.path in self.connections
        return ref.path in self.features

    def properties_of(self, ref: Ref) -> dict[str, PropertyValue]:
        if isinstance(ref, ComponentRef):
            return self.components[ref.path].properties
        if isinstance(ref, ConnectionRef):
            return self.connections[ref.path].properties
        return {}


# ---------------------------------------------------------------------------
# Queries


def instances_of(model: ModelInstance, kind: str) -> tuple[Ref, ...]:
    """All elements of `kind` in document order.

    `kind` is a component kind, the supertype ``component``, ``connection``
    or ``feature``.
    """
    if kind == "component":
        return tuple(model.order["component"])
    if kind in ("connection", "feature"):
        return tuple(model.order[kind])
    if kind not in COMPONENT_KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    return tuple(r for r in model.order["component"] if model.components[r.path].kind == kind)


def _child_named(model: ModelInstance, comp: Component, name: str) -> Ref | None:
    for sub in comp.subcomponents:
        if model.components[sub.path].name == name:
            return sub
    for feat in comp.features:
        if feat.name == name:
            return feat.ref
    for conn in comp.connections:
        if model.connections[conn.path].name == name:
            return conn
    return None


def resolve_reference(model: ModelInstance, context: ComponentRef, path: str) -> Ref:
    """Resolve a dotted name relative to `context`.

    The first segment names one of the context's subcomponents (or is
    ``this``); later segments descend through subcomponents and end at a
    component, feature or connection.
    """
    segments = path.split(".")
    comp = model.component(context)
    current: Ref = context
    for i, seg in enumerate(segments):
        if i == 0 and seg == "this":
            continue
        if not isinstance(current, ComponentRef):
            raise ResolveError(f"cannot resolve '{seg}' in '{path}': '{current.path}' is not a component",
                               path=context.path)
        comp = model.components[current.path]
        if i == 0:
            found = None
            for sub in comp.subcomponents:
                if model.components[sub.path].name == seg:
                    found = sub
            if found is None:
                raise ResolveError(f"cannot resolve '{seg}' in '{path}': no subcomponent named '{seg}'",
                                   path=context.path)
        else:
            found = _child_named(model, comp, seg)
            if found is None:
                raise ResolveError(f"cannot resolve '{seg}' in '{path}': '{comp.path}' has no element named '{seg}'",
                                   path=context.path)
        current = found
    return current


def resolve_outward(model: ModelInstance, context: ComponentRef, path: str) -> Ref:
    """Resolve `path` in `context`, then in each enclosing component.

    A path starting with the root component's name is also accepted as
    absolute. Used for ``ref`` property values, which usually point at
    siblings of the declaring component (a thread bound to a processor).
    """
    first_error: ResolveError | None = None
    ctx: ComponentRef | None = context
    while ctx is not None:
        try:
            return resolve_reference(model, ctx, path)
        except ResolveError as err:
            first_error = first_error or err
        ctx = model.components[ctx.path].parent
    root = model.components[model.root.path]
    head, _, rest = path.partition(".")
    if head == root.name:
        return model.root if not rest else resolve_reference(model, model.root, "this." + rest)
    assert first_error is not None
    raise first_error


def lookup_path(model: ModelInstance, path: str) -> Ref:
    """Find the element whose qualified path is `path`."""
    if path in model.components:
        return ComponentRef(path)
    if path in model.connections:
        return ConnectionRef(path)
    if path in model.features:
        return FeatureRef(path)
    raise ResolveError(f"no model element with qualified path '{path}'")


# ---------------------------------------------------------------------------
# Parsing

@dataclass
class _RawConnection:
    name: str
    source: str
    destination: str
    properties: list[tuple[str, object, Pos]]
    pos: Pos


@dataclass
class _RawComponent:
    kind: str
    name: str
    pos: Pos
    subcomponents: list[_RawComponent] = field(default_factory=list)
    features: list[tuple[str, str, Pos]] = field(default_factory=list)
    connections: list[_RawConnection] = field(default_factory=list)
    properties: list[tuple[str, object, Pos]] = field(default_factory=list)
    proves: list[tuple[str, list[ProveArg], Pos]] = field(default_factory=list)
    items: list[tuple[str, str]] = field(default_factory=list)


class _ModelParser:
    def __init__(self, text: str, filename: str | None):
        self.filename = filename
        self.ts = TokenStream(tokenize(text, filename), filename)

    def parse(self) -> _RawComponent:
        ts = self.ts
        if ts.at_end():
            raise ts.error("expected a top-level component declaration")
        root = self.component()
        if not ts.at_end():
            raise ts.error("a model contains exactly one top-level component")
        return root

    def ident(self, what: str = "identifier") -> Token:
        return self.ts.expect_kind("IDENT", what)

    def component(self) -> _RawComponent:
        ts = self.ts
        tok = ts.current
        if not tok.is_word(*COMPONENT_KINDS):
            raise ts.error(f"expected a component kind ({', '.join(COMPONENT_KINDS)}) "
                           f"but found '{tok.text or 'end of input'}'")
        ts.advance()
        name = self.ident("component name")
        comp = _RawComponent(tok.text, name.text, tok.pos)
        ts.expect_op("{")
        while not ts.accept_op("}"):
            if ts.at_end():
                raise ts.error(f"unterminated component '{name.text}': expected '}}'")
            self.item(comp)
        return comp

    def item(self, comp: _RawComponent) -> None:
        ts = self.ts
        tok = ts.current
        if tok.is_word(*COMPONENT_KINDS):
            sub = self.component()
            comp.subcomponents.append(sub)
            comp.items.append(("component", sub.name))
        elif tok.is_word("in", "out"):
            ts.advance()
            ts.expect_word("port")
            name = self.ident("port name")
            comp.features.append((name.text, tok.text, name.pos))
            comp.items.append(("feature", name.text))
        elif tok.is_word("connection"):
            ts.advance()
            name = self.ident("connection name")
            ts.expect_op(":")
            src = self.path()
            ts.expect_op("->")
            dst = self.path()
            props: list[tuple[str, object, Pos]] = []
            if ts.accept_op("{"):
                while not ts.accept_op("}"):
                    if not ts.current.is_word("property"):
                        raise ts.error("only property associations may appear inside a connection block")
                    props.append(self.property())
            comp.connections.append(_RawConnection(name.text, src, dst, props, name.pos))
            comp.items.append(("connection", name.text))
        elif tok.is_word("property"):
            prop = self.property()
            comp.properties.append(prop)
            comp.items.append(("property", prop[0]))
        elif tok.is_word("resolute"):
            ts.advance()
            ts.expect_op("{")
            while not ts.accept_op("}"):
                start = ts.expect_word("prove")
                claim = self.ident("claim name")
                ts.expect_op("(")
                args: list[ProveArg] = []
                if not ts.accept_op(")"):
                    args.append(self.prove_arg())
                    while ts.accept_op(","):
                        args.append(self.prove_arg())
                    ts.expect_op(")")
                comp.proves.append((claim.text, args, start.pos))
            comp.items.append(("resolute", ""))
        else:
            raise ts.error(f"unexpected '{tok.text or 'end of input'}' in component body")

    def path(self) -> str:
        parts = [self.ident("name").text]
        while self.ts.accept_op("."):
            parts.append(self.ident("name").text)
        return ".".join(parts)

    def property(self) -> tuple[str, object, Pos]:
        ts = self.ts
        ts.expect_word("property")
        first = self.ident("property name")
        parts = [first.text]
        while ts.accept_op("::"):
            parts.append(self.ident("property name").text)
        ts.expect_op("=")
        return "::".join(parts), self.pvalue(), first.pos

    def pvalue(self) -> object:
        """Property value; `ref` paths stay unresolved as ("ref", path, pos)."""
        ts = self.ts
        tok = ts.current
        if tok.kind == "STRING":
            ts.advance()
            return PropertyValue("string", tok.value)
        if tok.kind == "INT":
            ts.advance()
            return PropertyValue("integer", tok.value)
        if tok.kind == "REAL":
            ts.advance()
            return PropertyValue("real", tok.value)
        if tok.is_op("-") and ts.peek().kind in ("INT", "REAL"):
            ts.advance()
            num = ts.advance()
            return PropertyValue("integer" if num.kind == "INT" else "real", -num.value)
        if tok.is_word("true", "false"):
            ts.advance()
            return PropertyValue("boolean", tok.text == "true")
        if tok.is_word("ref"):
            ts.advance()
            return ("ref", self.path(), tok.pos)
        if tok.is_op("["):
            ts.advance()
            items = [self.pvalue()]
            while ts.accept_op(","):
                items.append(self.pvalue())
            ts.expect_op("]")
            return ("list", items, tok.pos)
        raise ts.error(f"expected a property value but found '{tok.text or 'end of input'}'")

    def prove_arg(self) -> ProveArg:
        ts = self.ts
        tok = ts.current
        if tok.kind == "STRING":
            ts.advance()
            return ProveArg("string", tok.value)
        if tok.kind == "INT":
            ts.advance()
            return ProveArg("integer", tok.value)
        if tok.kind == "REAL":
            ts.advance()
            return ProveArg("real", tok.value)
        if tok.is_word("true", "false"):
            ts.advance()
            return ProveArg("boolean", tok.text == "true")
        if tok.kind == "IDENT":
            return ProveArg("path", self.path())
        raise ts.error(f"expected a prove argument but found '{tok.text or 'end of input'}'")


class _Builder:
    """Turns the raw parse tree into a checked ModelInstance."""

    def __init__(self, filename: str | None):
        self.filename = filename
        self.components: dict[str, Component] = {}
        self.connections: dict[str, Connection] = {}
        self.features: dict[str, Feature] = {}
        self.order: dict[str, list[Ref]] = {"component": [], "connection": [], "feature": []}
        self.directives: list[ProveDirective] = []
        # resolved after the whole tree exists
        self.pending_conns: list[tuple[Component, _RawConnection]] = []
        self.pending_props: list[tuple[Component | Connection, Component, str, object]] = []
        self.pending_proves: list[tuple[Component, str, list[ProveArg], Pos]] = []

    def error(self, message: str, path: str | None, pos: Pos | None) -> ModelError:
        return ModelError(message, path, pos, self.filename)

    def build(self, raw_root: _RawComponent) -> ModelInstance:
        self.add_component(raw_root, None)
        root = ComponentRef(raw_root.name)
        model = ModelInstance(root, self.components, self.connections, self.features,
                              self.directives, self.order)
        for comp, raw in self.pending_conns:
            conn = self.make_connection(model, comp, raw)
            self.connections[conn.path] = conn
        # features and connections enumerate in textual order
        walk = self._textual_items(raw_root, raw_root.name)
        self.order["connection"] = [ConnectionRef(p) for kind, p in walk if kind == "connection"]
        self.order["feature"] = [FeatureRef(p) for kind, p in walk if kind == "feature"]
        for target, context, name, raw_value in self.pending_props:
            target.properties[name] = self.resolve_pvalue(model, context, raw_value)
        # directives in textual order
        for comp, claim, args, pos in sorted(self.pending_proves, key=lambda p: (p[3].line, p[3].column)):
            d = ProveDirective(comp.ref, claim, tuple(args), pos)
            comp.proves.append(d)
            self.directives.append(d)
        return model

    def _textual_items(self, raw: _RawComponent, path: str) -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        subs = {s.name: s for s in raw.subcomponents}
        for kind, name in raw.items:
            if kind in ("connection", "feature"):
                out.append((kind, f"{path}.{name}"))
            elif kind == "component":
                out.extend(self._textual_items(subs[name], f"{path}.{name}"))
        return out

    def add_component(self, raw: _RawComponent, parent: Component | None) -> Component:
        path = raw.name if parent is None else f"{parent.path}.{raw.name}"
        comp = Component(raw.name, raw.kind, path, parent.ref if parent else None, items=list(raw.items))
        self.components[path] = comp
        self.order["component"].append(comp.ref)
        seen: dict[str, str] = {}

        def claim_name(name: str, what: str, pos: Pos) -> None:
            if name == "this":
                raise self.error(f"'this' cannot be used as a {what} name", path, pos)
            if name in seen:
                raise self.error(f"duplicate name '{name}' ({what} clashes with earlier {seen[name]})", path, pos)
            seen[name] = what

        props_seen: set[str] = set()
        for pname, _, ppos in raw.properties:
            if pname in props_seen:
                raise self.error(f"duplicate property '{pname}'", path, ppos)
            props_seen.add(pname)
        for fname, direction, fpos in raw.features:
            claim_name(fname, "feature", fpos)
            feat = Feature(fname, direction, comp.ref)
            comp.features.append(feat)
            self.features[feat.path] = feat
        for rc in raw.connections:
            claim_name(rc.name, "connection", rc.pos)
        for sub in raw.subcomponents:
            claim_name(sub.name, "subcomponent", sub.pos)
        # subcomponents in textual order, preserving preorder enumeration
        for sub in raw.subcomponents:
            child = self.add_component(sub, comp)
            comp.subcomponents.append(child.ref)
        for rc in raw.connections:
            comp.connections.append(ConnectionRef(f"{path}.{rc.name}"))
            self.pending_conns.append((comp, rc))
        for pname, pval, _ in raw.properties:
            self.pending_props.append((comp, comp, pname, pval))
        for claim, args, pos in raw.proves:
            self.pending_proves.append((comp, claim, args, pos))
        return comp

    def make_connection(self, model: ModelInstance, comp: Component, raw: _RawConnection) -> Connection:
        ends = []
        for text in (raw.source, raw.destination):
            try:
                ref = resolve_reference(model, comp.ref, text)
            except ResolveError as err:
                raise self.error(f"connection '{raw.name}': {err.message}", f"{comp.path}.{raw.name}", raw.pos)
            if not isinstance(ref, FeatureRef):
                raise self.error(f"connection '{raw.name}': endpoint '{text}' is not a port",
                                 f"{comp.path}.{raw.name}", raw.pos)
            ends.append(ref)
        if ends[0] == ends[1]:
            raise self.error(f"connection '{raw.name}' connects port '{raw.source}' to itself",
                             f"{comp.path}.{raw.name}", raw.pos)
        conn = Connection(raw.name, comp.ref, ends[0], ends[1], {}, raw.source, raw.destination)
        props_seen: set[str] = set()
        for pname, pval, ppos in raw.properties:
            if pname in props_seen:
                raise self.error(f"duplicate property '{pname}'", conn.path, ppos)
            props_seen.add(pname)
            self.pending_props.append((conn, comp, pname, pval))
        return conn

    def resolve_pvalue(self, model: ModelInstance, context: Component, raw: object) -> PropertyValue:
        if isinstance(raw, PropertyValue):
            return raw
        tag, payload, pos = raw  # type: ignore[misc]
        if tag == "ref":
            try:
                ref = resolve_outward(model, context.ref, payload)
            except ResolveError as err:
                raise self.error(err.message, context.path, pos)
            return PropertyValue("ref", ref)
        items = [self.resolve_pvalue(model, context, item) for item in payload]
        tags = {item.tag for item in items}
        if len(tags) > 1:
            raise self.error(f"property list mixes value kinds: {', '.join(sorted(tags))}", context.path, pos)
        return PropertyValue("list", tuple(items))


def parse_model(source_text: str, filename: str | None = None) -> ModelInstance:
    """Parse model text into a checked instance tree.

    Raises ParseError for syntax errors and ModelError for semantic ones.
    """
    raw = _ModelParser(source_text, filename).parse()
    return _Builder(filename).build(raw)


# ---------------------------------------------------------------------------
# Pretty-printing

def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def render_property_value(pv: PropertyValue, context: ComponentRef | None = None) -> str:
    if pv.tag == "string":
        return _quote(pv.value)  # type: ignore[arg-type]
    if pv.tag == "boolean":
        return "true" if pv.value else "false"
    if pv.tag in ("integer", "real"):
        return repr(pv.value)
    if pv.tag == "ref":
        return f"ref {pv.value.path}"  # type: ignore[union-attr]
    return "[" + ", ".join(render_property_value(v, context) for v in pv.value) + "]"  # type: ignore[union-attr]


def render_model(model: ModelInstance) -> str:
    """Print a model back to source form; `ref` values are written as absolute paths."""
    lines: list[str] = []

    def emit(comp: Component, depth: int) -> None:
        pad = "  " * depth
        lines.append(f"{pad}{comp.kind} {comp.name} {{")
        inner = "  " * (depth + 1)
        subs = {model.components[s.path].name: model.components[s.path] for s in comp.subcomponents}
        feats = {f.name: f for f in comp.features}
        conns = {model.connections[c.path].name: model.connections[c.path] for c in comp.connections}
        for kind, name in comp.items:
            if kind == "component":
                emit(subs[name], depth + 1)
            elif kind == "feature":
                f = feats[name]
                lines.append(f"{inner}{f.direction} port {f.name}")
            elif kind == "connection":
                c = conns[name]
                head = f"{inner}connection {c.name} : {c.source_text} -> {c.destination_text}"
                if c.properties:
                    lines.append(head + " {")
                    for pname, pv in c.properties.items():
                        lines.append(f"{inner}  property {pname} = {render_property_value(pv)}")
                    lines.append(f"{inner}}}")
                else:
                    lines.append(head)
            elif kind == "property":
                lines.append(f"{inner}property {name} = {render_property_value(comp.properties[name])}")
        if comp.proves:
            lines.append(f"{inner}resolute {{")
            for d in comp.proves:
                lines.append(f"{inner}  prove {d.text}")
            lines.append(f"{inner}}}")
        lines.append(f"{pad}}}")

    emit(model.components[model.root.path], 0)
    return "\n".join(lines) + "\n"
