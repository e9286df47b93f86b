"""Syntax trees for rule libraries: formulas, expressions, types, definitions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..model import COMPONENT_KINDS
from ..syntax import Pos

MODEL_TYPES = COMPONENT_KINDS + ("component", "connection", "feature")
BASE_TYPES = ("bool", "int", "real", "string")


@dataclass(frozen=True)
class Type:
    """A static type. ``any`` is the type of property lookups, checked at run time;
    ``empty`` is the element type of the literal ``{}``."""

    name: str
    elem: Optional[Type] = None

    def __str__(self) -> str:
        if self.name == "set":
            return "{" + str(self.elem) + "}"
        return self.name

    @property
    def is_set(self) -> bool:
        return self.name == "set"

    @property
    def is_model(self) -> bool:
        return self.name in MODEL_TYPES

    @property
    def is_component(self) -> bool:
        return self.name in COMPONENT_KINDS or self.name == "component"

    @property
    def is_numeric(self) -> bool:
        return self.name in ("int", "real")


BOOL = Type("bool")
INT = Type("int")
REAL = Type("real")
STRING = Type("string")
ANY = Type("any")
EMPTY = Type("empty")
COMPONENT = Type("component")
CONNECTION = Type("connection")
FEATURE = Type("feature")


def set_of(elem: Type) -> Type:
    return Type("set", elem)


# ---------------------------------------------------------------------------
# Expressions. `ty` is filled in by the typechecker.

@dataclass(eq=True)
class Expr:
    pass


def _pos() -> Pos | None:
    return field(default=None, compare=False, repr=False)  # type: ignore[return-value]


def _ty() -> Type | None:
    return field(default=None, compare=False, repr=False)  # type: ignore[return-value]


@dataclass(eq=True)
class Literal(Expr):
    value: object
    pos: Pos | None = _pos()
    ty: Type | None = _ty()


@dataclass(eq=True)
class Var(Expr):
    name: str
    pos: Pos | None = _pos()
    ty: Type | None = _ty()


@dataclass(eq=True)
class Call(Expr):
    name: str
    args: list[Expr]
    pos: Pos | None = _pos()
    ty: Type | None = _ty()


@dataclass(eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    pos: Pos | None = _pos()
    ty: Type | None = _ty()


@dataclass(eq=True)
class UnOp(Expr):
    op: str  # "not" | "-"
    operand: Expr
    pos: Pos | None = _pos()
    ty: Type | None = _ty()


@dataclass(eq=True)
class SetLit(Expr):
    items: list[Expr]
    pos: Pos | None = _pos()
    ty: Type | None = _ty()


@dataclass(eq=True)
class KindDomain:
    kind: str


@dataclass(eq=True)
class SetDomain:
    expr: Expr


Domain = Union[KindDomain, SetDomain]


@dataclass(eq=True)
class Comprehension(Expr):
    element: Expr
    var: str
    domain: Domain
    cond: Optional[Expr] = None
    pos: Pos | None = _pos()
    ty: Type | None = _ty()


@dataclass(eq=True)
class IfExpr(Expr):
    cond: Expr
    then: Expr
    else_: Expr
    pos: Pos | None = _pos()
    ty: Type | None = _ty()


# ---------------------------------------------------------------------------
# Formulas. There is deliberately no negation node.

@dataclass(eq=True)
class Formula:
    pass


@dataclass(eq=True)
class ClaimApp(Formula):
    name: str
    args: list[Expr]
    pos: Pos | None = _pos()


@dataclass(eq=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(eq=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(eq=True)
class Implies(Formula):
    antecedent: Expr
    consequent: Formula


@dataclass(eq=True)
class Forall(Formula):
    var: str
    domain: Domain
    body: Formula
    pos: Pos | None = _pos()


@dataclass(eq=True)
class Exists(Formula):
    var: str
    domain: Domain
    body: Formula
    pos: Pos | None = _pos()


@dataclass(eq=True)
class Let(Formula):
    var: str
    type: Type
    expr: Expr
    body: Formula
    pos: Pos | None = _pos()


@dataclass(eq=True)
class EvalAtom(Formula):
    expr: Expr


# ---------------------------------------------------------------------------
# Definitions

@dataclass(eq=True)
class Param:
    name: str
    type: Type


@dataclass(eq=True)
class ClaimText:
    segments: list[Union[str, Expr]]


@dataclass(eq=True)
class RuleClause:
    claim_name: str
    params: list[Param]
    description: Optional[ClaimText]
    body: Formula
    pos: Pos | None = _pos()
    filename: str | None = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class FunDef:
    name: str
    params: list[Param]
    return_type: Optional[Type]
    body: Expr
    pos: Pos | None = _pos()
    filename: str | None = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class ConstDef:
    name: str
    type: Type
    expr: Expr
    pos: Pos | None = _pos()
    filename: str | None = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class ExternalDef:
    name: str
    params: list[Param]
    return_type: Type
    command: str
    stateless: bool = False
    pos: Pos | None = _pos()
    filename: str | None = field(default=None, compare=False, repr=False)


@dataclass
class Library:
    clauses: list[RuleClause] = field(default_factory=list)
    functions: dict[str, FunDef] = field(default_factory=dict)
    constants: dict[str, ConstDef] = field(default_factory=dict)
    externals: dict[str, ExternalDef] = field(default_factory=dict)
    # names defined more than once within or across files, reported by the typechecker
    duplicates: list[tuple[str, Pos | None, str | None]] = field(default_factory=list)

    def claim_names(self) -> list[str]:
        return list(dict.fromkeys(c.claim_name for c in self.clauses))


def merge_libraries(libraries: list[Library]) -> Library:
    """Concatenate libraries in load order; clause order is preserved."""
    out = Library()
    for lib in libraries:
        out.clauses.extend(lib.clauses)
        out.duplicates.extend(lib.duplicates)
        for table, src in ((out.functions, lib.functions), (out.constants, lib.constants),
                           (out.externals, lib.externals)):
            for name, d in src.items():
                if name in table:
                    out.duplicates.append((name, d.pos, d.filename))
                else:
                    table[name] = d  # type: ignore[index]
    return out


def walk_expr(expr: Expr):
    yield expr
    if isinstance(expr, Call):
        for a in expr.args:
            yield from walk_expr(a)
    elif isinstance(expr, BinOp):
        yield from walk_expr(expr.left)
        yield from walk_expr(expr.right)
    elif isinstance(expr, UnOp):
        yield from walk_expr(expr.operand)
    elif isinstance(expr, SetLit):
        for i in expr.items:
            yield from walk_expr(i)
    elif isinstance(expr, Comprehension):
        yield from walk_expr(expr.element)
        if isinstance(expr.domain, SetDomain):
            yield from walk_expr(expr.domain.expr)
        if expr.cond is not None:
            yield from walk_expr(expr.cond)
    elif isinstance(expr, IfExpr):
        yield from walk_expr(expr.cond)
        yield from walk_expr(expr.then)
        yield from walk_expr(expr.else_)


def free_vars_expr(expr: Expr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Comprehension):
        inner = free_vars_expr(expr.element)
        if expr.cond is not None:
            inner |= free_vars_expr(expr.cond)
        inner.discard(expr.var)
        if isinstance(expr.domain, SetDomain):
            inner |= free_vars_expr(expr.domain.expr)
        return inner
    out: set[str] = set()
    for child in _expr_children(expr):
        out |= free_vars_expr(child)
    return out


def _expr_children(expr: Expr) -> list[Expr]:
    if isinstance(expr, Call):
        return list(expr.args)
    if isinstance(expr, BinOp):
        return [expr.left, expr.right]
    if isinstance(expr, UnOp):
        return [expr.operand]
    if isinstance(expr, SetLit):
        return list(expr.items)
    if isinstance(expr, IfExpr):
        return [expr.cond, expr.then, expr.else_]
    return []


def free_vars_formula(f: Formula) -> set[str]:
    if isinstance(f, ClaimApp):
        out: set[str] = set()
        for a in f.args:
            out |= free_vars_expr(a)
        return out
    if isinstance(f, EvalAtom):
        return free_vars_expr(f.expr)
    if isinstance(f, (And, Or)):
        return free_vars_formula(f.left) | free_vars_formula(f.right)
    if isinstance(f, Implies):
        return free_vars_expr(f.antecedent) | free_vars_formula(f.consequent)
    if isinstance(f, (Forall, Exists)):
        inner = free_vars_formula(f.body) - {f.var}
        if isinstance(f.domain, SetDomain):
            inner |= free_vars_expr(f.domain.expr)
        return inner
    if isinstance(f, Let):
        return free_vars_expr(f.expr) | (free_vars_formula(f.body) - {f.var})
    raise AssertionError(f"unknown formula {f!r}")


def format_expr(expr: Expr) -> str:
    """Source-like rendering of an expression, for diagnostics."""
    from ..values import display

    if isinstance(expr, Literal):
        if isinstance(expr.value, str):
            return '"' + expr.value.replace('"', '\\"') + '"'
        return display(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Call):
        return f"{expr.name}({', '.join(format_expr(a) for a in expr.args)})"
    if isinstance(expr, BinOp):
        return f"({format_expr(expr.left)} {expr.op} {format_expr(expr.right)})"
    if isinstance(expr, UnOp):
        sep = " " if expr.op == "not" else ""
        return f"{expr.op}{sep}{format_expr(expr.operand)}"
    if isinstance(expr, SetLit):
        return "{" + ", ".join(format_expr(i) for i in expr.items) + "}"
    if isinstance(expr, Comprehension):
        dom = expr.domain.kind if isinstance(expr.domain, KindDomain) else None
        binder = f"({expr.var} : {dom})" if dom else f"({expr.var} in {format_expr(expr.domain.expr)})"  # type: ignore[union-attr]
        cond = f" if {format_expr(expr.cond)}" if expr.cond is not None else ""
        return "{" + f"{format_expr(expr.element)} for {binder}{cond}" + "}"
    if isinstance(expr, IfExpr):
        return f"if {format_expr(expr.cond)} then {format_expr(expr.then)} else {format_expr(expr.else_)}"
    return repr(expr)
