"""Static checking of rule libraries.

Beyond ordinary typing this enforces the split between the logic level and
the computation level: claim names may never appear inside an expression
(function bodies, descriptions, implication antecedents, comprehensions),
and in particular never under ``not``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from ..model import COMPONENT_KINDS, ComponentRef, ConnectionRef, FeatureRef, ModelInstance, ProveDirective, \
    ResolveError, resolve_reference
from ..syntax import Pos
from ..values import VSet
from .ast import (
    ANY, BOOL, COMPONENT, CONNECTION, EMPTY, FEATURE, INT, REAL, STRING, And, BinOp, Call, ClaimApp,
    Comprehension, ConstDef, Domain, EvalAtom, Exists, Expr, ExternalDef, Forall, Formula, FunDef, IfExpr,
    Implies, KindDomain, Let, Library, Literal, Or, RuleClause, SetDomain, SetLit, Type, UnOp, Var, set_of,
    free_vars_expr, free_vars_formula,
)

BUILTINS = ("parent", "source", "destination", "name", "property", "has_property", "member", "union",
            "sum", "size", "is_empty", "debug")


@dataclass
class Diagnostic:
    message: str
    pos: Pos | None = None
    filename: str | None = None

    def __str__(self) -> str:
        where = f"{self.filename or '<library>'}:{self.pos}: " if self.pos else (
            f"{self.filename}: " if self.filename else "")
        return f"{where}{self.message}"


class TypeCheckError(Exception):
    def __init__(self, errors: list[Diagnostic]):
        self.errors = errors
        super().__init__("\n".join(str(e) for e in errors))


@dataclass
class Goal:
    """A ground formula to prove, plus bindings for its free variables."""

    formula: Formula
    env: dict[str, object] = field(default_factory=dict)
    directive: ProveDirective | None = None


@dataclass
class TypedLibrary:
    clauses: list[RuleClause]
    claims: dict[str, list[int]]  # claim name -> clause indices, declaration order
    claim_params: dict[str, list[Type]]
    functions: dict[str, FunDef]
    function_types: dict[str, Type]
    constants: dict[str, ConstDef]
    externals: dict[str, ExternalDef]

    def clauses_for(self, name: str) -> list[tuple[int, RuleClause]]:
        return [(i, self.clauses[i]) for i in self.claims.get(name, [])]


# ---------------------------------------------------------------------------
# Type relations

def is_subtype(a: Type, b: Type) -> bool:
    if a == b or a == ANY or b == ANY:
        return True
    if a.name in COMPONENT_KINDS and b == COMPONENT:
        return True
    if a == INT and b == REAL:
        return True
    if a.is_set and b.is_set:
        return a.elem == EMPTY or is_subtype(a.elem, b.elem)  # type: ignore[arg-type]
    return False


def join(a: Type, b: Type) -> Type | None:
    if a == ANY:
        return b
    if b == ANY:
        return a
    if is_subtype(a, b):
        return b
    if is_subtype(b, a):
        return a
    if a.is_component and b.is_component:
        return COMPONENT
    if a.is_set and b.is_set:
        elem = join(a.elem, b.elem)  # type: ignore[arg-type]
        return set_of(elem) if elem is not None else None
    return None


def is_displayable(t: Type) -> bool:
    return not t.is_set


def domain_type(kind: str) -> Type:
    return Type(kind)


def type_of_value(value: object, model: ModelInstance | None = None) -> Type:
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return INT
    if isinstance(value, float):
        return REAL
    if isinstance(value, str):
        return STRING
    if isinstance(value, ComponentRef):
        return Type(model.components[value.path].kind) if model else COMPONENT
    if isinstance(value, ConnectionRef):
        return CONNECTION
    if isinstance(value, FeatureRef):
        return FEATURE
    if isinstance(value, VSet):
        elem = EMPTY
        for v in value:
            t = type_of_value(v, model)
            elem = t if elem == EMPTY else (join(elem, t) or ANY)
        return set_of(elem)
    raise TypeError(f"not a value: {value!r}")


# ---------------------------------------------------------------------------

class _Checker:
    def __init__(self, lib: Library):
        self.lib = lib
        self.errors: list[Diagnostic] = []
        self.filename: str | None = None
        self.claim_params: dict[str, list[Type]] = {}
        self.function_types: dict[str, Type] = {}
        self.inferring: set[str] = set()
        self.where = ""

    def error(self, message: str, pos: Pos | None) -> None:
        self.errors.append(Diagnostic(message, pos, self.filename))

    # -- names ---------------------------------------------------------------

    def check_names(self) -> None:
        lib = self.lib
        for name, pos, filename in lib.duplicates:
            self.errors.append(Diagnostic(f"'{name}' is defined more than once", pos, filename))
        tables = [("function", lib.functions), ("constant", lib.constants), ("external", lib.externals)]
        claim_pos = {}
        for c in lib.clauses:
            claim_pos.setdefault(c.claim_name, (c.pos, c.filename))
        for name, (pos, filename) in claim_pos.items():
            for what, table in tables:
                if name in table:
                    self.errors.append(Diagnostic(f"'{name}' is both a claim and a {what}", pos, filename))
        for i, (what_a, ta) in enumerate(tables):
            for what_b, tb in tables[i + 1:]:
                for name in ta.keys() & tb.keys():
                    d = ta[name]
                    self.errors.append(Diagnostic(f"'{name}' is both a {what_a} and a {what_b}", d.pos, d.filename))
        for name in BUILTINS:
            for what, table in tables:
                if name in table:
                    d = table[name]
                    self.errors.append(Diagnostic(f"{what} '{name}' redefines a built-in function", d.pos, d.filename))
            if name in claim_pos:
                pos, filename = claim_pos[name]
                self.errors.append(Diagnostic(f"claim '{name}' redefines a built-in function", pos, filename))

    # -- expressions ---------------------------------------------------------

    def expr(self, e: Expr, scope: dict[str, Type]) -> Type:
        t = self._expr(e, scope)
        e.ty = t  # type: ignore[attr-defined]
        return t

    def _expr(self, e: Expr, scope: dict[str, Type]) -> Type:
        if isinstance(e, Literal):
            return type_of_value(e.value)
        if isinstance(e, Var):
            if e.name in scope:
                return scope[e.name]
            if e.name in self.lib.constants:
                return self.lib.constants[e.name].type
            if e.name in self.claim_params:
                self.error(f"claim '{e.name}' used inside a computation{self.where}", e.pos)
                return ANY
            self.error(f"unknown variable '{e.name}'", e.pos)
            return ANY
        if isinstance(e, Call):
            return self.call(e, scope)
        if isinstance(e, BinOp):
            return self.binop(e, scope)
        if isinstance(e, UnOp):
            if e.op == "not" and isinstance(e.operand, Call) and e.operand.name in self.claim_params:
                self.error(f"claim '{e.operand.name}' used under negation", e.pos)
                for a in e.operand.args:
                    self.expr(a, scope)
                e.operand.ty = BOOL  # type: ignore[attr-defined]
                return BOOL
            t = self.expr(e.operand, scope)
            if e.op == "not":
                if not is_subtype(t, BOOL):
                    self.error(f"'not' expects bool, got {t}", e.pos)
                return BOOL
            if not t.is_numeric and t != ANY:
                self.error(f"unary '-' expects a number, got {t}", e.pos)
                return INT
            return t
        if isinstance(e, SetLit):
            elem = EMPTY
            for item in e.items:
                t = self.expr(item, scope)
                j = t if elem == EMPTY else join(elem, t)
                if j is None:
                    self.error(f"set elements have incompatible types {elem} and {t}", item.pos)  # type: ignore[attr-defined]
                    j = ANY
                elem = j
            return set_of(elem)
        if isinstance(e, Comprehension):
            var_t = self.domain(e.domain, scope, e.pos)
            inner = dict(scope)
            inner[e.var] = var_t
            if e.cond is not None:
                ct = self.expr(e.cond, inner)
                if not is_subtype(ct, BOOL):
                    self.error(f"comprehension condition must be bool, got {ct}", e.pos)
            return set_of(self.expr(e.element, inner))
        if isinstance(e, IfExpr):
            ct = self.expr(e.cond, scope)
            if not is_subtype(ct, BOOL):
                self.error(f"'if' condition must be bool, got {ct}", e.pos)
            a, b = self.expr(e.then, scope), self.expr(e.else_, scope)
            j = join(a, b)
            if j is None:
                self.error(f"'if' branches have incompatible types {a} and {b}", e.pos)
                return ANY
            return j
        raise AssertionError(f"unknown expression {e!r}")

    def domain(self, d: Domain, scope: dict[str, Type], pos: Pos | None) -> Type:
        if isinstance(d, KindDomain):
            return domain_type(d.kind)
        t = self.expr(d.expr, scope)
        if t == ANY:
            return ANY
        if not t.is_set:
            self.error(f"'in' expects a set, got {t}", pos)
            return ANY
        return t.elem if t.elem != EMPTY else ANY  # type: ignore[return-value]

    def binop(self, e: BinOp, scope: dict[str, Type]) -> Type:
        a, b = self.expr(e.left, scope), self.expr(e.right, scope)
        op = e.op
        if op in ("and", "or"):
            for t in (a, b):
                if not is_subtype(t, BOOL):
                    self.error(f"'{op}' expects bool operands, got {t}", e.pos)
            return BOOL
        if op in ("+", "-", "*", "/"):
            for t in (a, b):
                if not t.is_numeric and t != ANY:
                    self.error(f"arithmetic '{op}' expects numbers, got {t}", e.pos)
                    return INT
            if a == ANY or b == ANY:
                return ANY if (a == ANY and b == ANY) else (REAL if REAL in (a, b) else ANY)
            return INT if a == b == INT else REAL
        if op in ("=", "<>"):
            if join(a, b) is None:
                self.error(f"cannot compare {a} with {b}", e.pos)
            return BOOL
        # ordering
        for t in (a, b):
            if not t.is_numeric and t != ANY:
                self.error(f"'{op}' expects numbers, got {t}", e.pos)
        return BOOL

    def args(self, e: Call, params: list[Type], scope: dict[str, Type], what: str) -> None:
        if len(e.args) != len(params):
            self.error(f"{what} '{e.name}' expects {len(params)} argument(s), got {len(e.args)}", e.pos)
        for i, a in enumerate(e.args):
            t = self.expr(a, scope)
            if i < len(params) and not is_subtype(t, params[i]):
                self.error(f"argument {i + 1} of {what} '{e.name}' has type {t}, expected {params[i]}", e.pos)

    def call(self, e: Call, scope: dict[str, Type]) -> Type:
        name = e.name
        lib = self.lib
        if name in self.claim_params:
            self.error(f"claim '{name}' used inside a computation{self.where}", e.pos)
            for a in e.args:
                self.expr(a, scope)
            return BOOL
        if name in BUILTINS:
            return self.builtin(e, scope)
        if name in lib.functions:
            f = lib.functions[name]
            self.args(e, [p.type for p in f.params], scope, "function")
            return self.function_type(f)
        if name in lib.externals:
            x = lib.externals[name]
            self.args(e, [p.type for p in x.params], scope, "external")
            return x.return_type
        self.error(f"unknown function '{name}'", e.pos)
        for a in e.args:
            self.expr(a, scope)
        return ANY

    def builtin(self, e: Call, scope: dict[str, Type]) -> Type:
        name = e.name
        arity = {"parent": 1, "source": 1, "destination": 1, "name": 1, "property": 2, "has_property": 2,
                 "member": 2, "union": 2, "sum": 1, "size": 1, "is_empty": 1, "debug": 2}[name]
        ts = [self.expr(a, scope) for a in e.args]
        if len(ts) != arity:
            self.error(f"built-in '{name}' expects {arity} argument(s), got {len(ts)}", e.pos)
            return ANY

        def want(i: int, ok: bool, expected: str) -> None:
            if not ok and ts[i] != ANY:
                self.error(f"argument {i + 1} of '{name}' has type {ts[i]}, expected {expected}", e.pos)

        if name == "parent":
            want(0, ts[0].is_component or ts[0] == FEATURE, "a component or feature")
            return COMPONENT
        if name in ("source", "destination"):
            want(0, ts[0] == CONNECTION, "connection")
            return FEATURE
        if name == "name":
            want(0, ts[0].is_model, "a model element")
            return STRING
        if name in ("property", "has_property"):
            want(0, ts[0].is_model, "a model element")
            want(1, ts[1] == STRING, "string")
            return ANY if name == "property" else BOOL
        if name == "member":
            want(1, ts[1].is_set, "a set")
            if ts[1].is_set and ts[1].elem not in (EMPTY, ANY) and join(ts[0], ts[1].elem) is None:  # type: ignore[arg-type]
                self.error(f"'member' cannot find a {ts[0]} in a set of {ts[1].elem}", e.pos)
            return BOOL
        if name == "union":
            want(0, ts[0].is_set, "a set")
            want(1, ts[1].is_set, "a set")
            if ts[0] == ANY or ts[1] == ANY:
                return ts[1] if ts[0] == ANY else ts[0]
            if not (ts[0].is_set and ts[1].is_set):
                return ANY
            j = join(ts[0], ts[1])
            if j is None:
                self.error(f"cannot union {ts[0]} with {ts[1]}", e.pos)
                return ANY
            return j
        if name == "sum":
            t = ts[0]
            if t == ANY:
                return ANY
            if not t.is_set or not (t.elem.is_numeric or t.elem in (EMPTY, ANY)):  # type: ignore[union-attr]
                self.error(f"'sum' expects a set of numbers, got {t}", e.pos)
                return INT
            if t.elem == ANY:
                return ANY
            return REAL if t.elem == REAL else INT
        if name in ("size", "is_empty"):
            want(0, ts[0].is_set, "a set")
            return INT if name == "size" else BOOL
        if name == "debug":
            want(0, ts[0] == STRING, "string")
            return ts[1]
        raise AssertionError(name)

    def function_type(self, f: FunDef) -> Type:
        if f.return_type is not None:
            return f.return_type
        if f.name in self.function_types:
            return self.function_types[f.name]
        if f.name in self.inferring:
            self.error(f"recursive function '{f.name}' needs a declared return type", f.pos)
            return ANY
        self.inferring.add(f.name)
        saved = self.filename
        self.filename = f.filename
        t = self.expr(f.body, {p.name: p.type for p in f.params})
        self.filename = saved
        self.inferring.discard(f.name)
        self.function_types[f.name] = t
        return t

    # -- formulas ------------------------------------------------------------

    def formula(self, f: Formula, scope: dict[str, Type]) -> Formula:
        if isinstance(f, ClaimApp):
            if f.name in self.claim_params:
                params = self.claim_params[f.name]
                if len(f.args) != len(params):
                    self.error(f"claim '{f.name}' expects {len(params)} argument(s), got {len(f.args)}", f.pos)
                for i, a in enumerate(f.args):
                    t = self.expr(a, scope)
                    if i < len(params) and not is_subtype(t, params[i]):
                        self.error(f"argument {i + 1} of claim '{f.name}' has type {t}, expected {params[i]}", f.pos)
                return f
            call = Call(f.name, f.args, f.pos)
            t = self.expr(call, scope)
            if not is_subtype(t, BOOL):
                self.error(f"'{f.name}(...)' is used as a formula but has type {t}", f.pos)
            return EvalAtom(call)
        if isinstance(f, EvalAtom):
            t = self.expr(f.expr, scope)
            if not is_subtype(t, BOOL):
                self.error(f"expression used as a formula must be bool, got {t}", getattr(f.expr, "pos", None))
            return f
        if isinstance(f, And):
            return And(self.formula(f.left, scope), self.formula(f.right, scope))
        if isinstance(f, Or):
            return Or(self.formula(f.left, scope), self.formula(f.right, scope))
        if isinstance(f, Implies):
            self.where = " (implication antecedents are computations)"
            t = self.expr(f.antecedent, scope)
            self.where = ""
            if not is_subtype(t, BOOL):
                self.error(f"implication antecedent must be bool, got {t}", getattr(f.antecedent, "pos", None))
            return Implies(f.antecedent, self.formula(f.consequent, scope))
        if isinstance(f, (Forall, Exists)):
            var_t = self.domain(f.domain, scope, f.pos)
            inner = dict(scope)
            inner[f.var] = var_t
            body = self.formula(f.body, inner)
            return type(f)(f.var, f.domain, body, f.pos)
        if isinstance(f, Let):
            t = self.expr(f.expr, scope)
            if not is_subtype(t, f.type):
                self.error(f"let '{f.var}' declared {f.type} but bound to {t}", f.pos)
            inner = dict(scope)
            inner[f.var] = f.type
            return Let(f.var, f.type, f.expr, self.formula(f.body, inner), f.pos)
        raise AssertionError(f"unknown formula {f!r}")

    # -- definitions ---------------------------------------------------------

    def run(self) -> TypedLibrary:
        lib = self.lib
        self.check_names()
        claims: dict[str, list[int]] = {}
        for i, c in enumerate(lib.clauses):
            claims.setdefault(c.claim_name, []).append(i)
            types = [p.type for p in c.params]
            if c.claim_name not in self.claim_params:
                self.claim_params[c.claim_name] = types
            elif self.claim_params[c.claim_name] != types:
                self.errors.append(Diagnostic(
                    f"rule for claim '{c.claim_name}' has parameter types "
                    f"({', '.join(map(str, types))}) but an earlier rule has "
                    f"({', '.join(map(str, self.claim_params[c.claim_name]))})", c.pos, c.filename))

        for name, const in lib.constants.items():
            self.filename = const.filename
            t = self.expr(const.expr, {})
            if not is_subtype(t, const.type):
                self.error(f"constant '{name}' declared {const.type} but its value has type {t}", const.pos)
        for name, f in lib.functions.items():
            self.filename = f.filename
            self._params_distinct(f.params, f.pos)
            if f.return_type is not None:
                t = self.expr(f.body, {p.name: p.type for p in f.params})
                if not is_subtype(t, f.return_type):
                    self.error(f"function '{name}' declared to return {f.return_type} but its body has type {t}",
                               f.pos)
                self.function_types[name] = f.return_type
            else:
                self.function_type(f)
        for name, x in lib.externals.items():
            self.filename = x.filename
            self._params_distinct(x.params, x.pos)
            if x.return_type == ANY:
                self.error(f"external '{name}' needs a concrete return type", x.pos)

        clauses: list[RuleClause] = []
        for c in lib.clauses:
            self.filename = c.filename
            self._params_distinct(c.params, c.pos)
            scope = {p.name: p.type for p in c.params}
            if c.description is not None:
                for seg in c.description.segments:
                    if isinstance(seg, str):
                        continue
                    t = self.expr(seg, scope)
                    if not is_displayable(t):
                        self.error(f"claim description embeds a value of type {t}, which cannot be displayed",
                                   seg.pos)  # type: ignore[attr-defined]
            body = self.formula(c.body, scope)
            used = free_vars_formula(c.body)
            for seg in (c.description.segments if c.description else []):
                if not isinstance(seg, str):
                    used |= free_vars_expr(seg)
            for p in c.params:
                if p.name not in used and not p.name.startswith("_"):
                    self.error(f"parameter '{p.name}' of claim '{c.claim_name}' is never used "
                               f"(prefix it with '_' to ignore it)", c.pos)
            clauses.append(RuleClause(c.claim_name, c.params, c.description, body, c.pos, c.filename))

        if self.errors:
            raise TypeCheckError(self.errors)
        return TypedLibrary(clauses, claims, self.claim_params, dict(lib.functions), dict(self.function_types),
                            dict(lib.constants), dict(lib.externals))

    def _params_distinct(self, params, pos) -> None:
        names = [p.name for p in params]
        for n in set(names):
            if names.count(n) > 1:
                self.error(f"parameter '{n}' is declared more than once", pos)


def typecheck(lib: Library) -> TypedLibrary:
    """Typecheck a (merged) library. Raises TypeCheckError listing every violation."""
    return _Checker(copy.deepcopy(lib)).run()


def attach_prove_directives(lib: TypedLibrary, model: ModelInstance) -> list[Goal]:
    """Turn every prove directive of `model` into a ground claim goal.

    Path arguments resolve relative to the component carrying the directive.
    Raises ResolveError for unknown names and TypeCheckError for ill-typed
    arguments.
    """
    goals = []
    for d in model.prove_directives:
        where = f"prove {d.text} in {d.component.path}"
        if d.claim not in lib.claim_params:
            raise TypeCheckError([Diagnostic(f"{where}: unknown claim '{d.claim}'", d.pos)])
        params = lib.claim_params[d.claim]
        if len(params) != len(d.args):
            raise TypeCheckError([Diagnostic(
                f"{where}: claim '{d.claim}' expects {len(params)} argument(s), got {len(d.args)}", d.pos)])
        values: list[object] = []
        for i, (arg, pt) in enumerate(zip(d.args, params)):
            if arg.tag == "path":
                try:
                    value: object = resolve_reference(model, d.component, arg.value)  # type: ignore[arg-type]
                except ResolveError as err:
                    raise ResolveError(f"{where}: {err.message}", path=d.component.path, pos=d.pos) from None
            else:
                value = arg.value
            vt = type_of_value(value, model)
            if pt == REAL and vt == INT:
                value = float(value)  # type: ignore[arg-type]
            elif not is_subtype(vt, pt):
                raise TypeCheckError([Diagnostic(
                    f"{where}: argument {i + 1} is a {vt} but claim '{d.claim}' expects {pt}", d.pos)])
            values.append(value)
        goal = ClaimApp(d.claim, [Literal(v, d.pos, type_of_value(v, model)) for v in values], d.pos)
        goals.append(Goal(goal, {}, d))
    return goals
