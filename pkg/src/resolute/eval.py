"""Deterministic evaluation of the computation language.

Evaluation errors (division by zero, a missing property, a failing external
tool) raise :class:`EvalError`. They are diagnostics that abort a proof,
never silent claim failures.
"""

from __future__ import annotations

import json
import logging
import os
import shlex
import subprocess
import threading
from contextlib import nullcontext
from dataclasses import dataclass, field, replace
from typing import Mapping

from .lang.ast import (
    ANY, EMPTY, REAL, BinOp, Call, Comprehension, ExternalDef, Expr, IfExpr, KindDomain, Literal, SetLit, Type,
    UnOp, Var, format_expr,
)
from .lang.typecheck import TypedLibrary, is_subtype, type_of_value
from .model import (
    COMPONENT_KINDS, MODEL_REF_TYPES, ComponentRef, ConnectionRef, FeatureRef, ModelInstance, PropertyValue,
    ResolveError, instances_of, lookup_path,
)
from .syntax import INT_MAX, INT_MIN, Pos
from .values import VSet, display, to_json

log = logging.getLogger(__name__)

DEFAULT_EXTERNAL_TIMEOUT = 30.0
TIMEOUT_ENV_VAR = "RESOLUTE_EXTERNAL_TIMEOUT_SECS"

_external_lock = threading.Lock()


class EvalError(Exception):
    def __init__(self, message: str, pos: Pos | None = None, *, expr: Expr | None = None,
                 command: str | None = None, exit_code: int | None = None):
        self.message = message
        self.pos = pos
        self.expr = expr
        self.command = command
        self.exit_code = exit_code
        self.claim: str | None = None  # claim instance being proven, filled in by the prover
        super().__init__(message)

    def __str__(self) -> str:
        parts = []
        if self.pos is not None:
            parts.append(f"{self.pos}: ")
        parts.append(self.message)
        if self.expr is not None:
            parts.append(f" in '{format_expr(self.expr)}'")
        if self.claim is not None:
            parts.append(f" while proving {self.claim}")
        return "".join(parts)


@dataclass(frozen=True)
class Env:
    """Variable bindings plus read access to the model and library."""

    model: ModelInstance
    lib: TypedLibrary
    vars: Mapping[str, object] = field(default_factory=dict)
    external_timeout: float | None = None

    def bind(self, name: str, value: object) -> Env:
        return replace(self, vars={**self.vars, name: value})

    def with_vars(self, vars: Mapping[str, object]) -> Env:
        return replace(self, vars=dict(vars))


# ---------------------------------------------------------------------------
# Conversions and runtime checks

def property_to_value(pv: PropertyValue) -> object:
    if pv.tag == "list":
        return VSet(property_to_value(v) for v in pv.value)  # type: ignore[union-attr]
    return pv.value


def _coerce(value: object, ty: Type | None) -> object:
    """Widen ints to reals where the static type says real."""
    if ty is None:
        return value
    if ty == REAL and type(value) is int:
        return float(value)
    if ty.is_set and isinstance(value, VSet) and ty.elem == REAL:
        return VSet(float(v) if type(v) is int else v for v in value)
    return value


def conform(value: object, ty: Type, model: ModelInstance, what: str, pos: Pos | None = None) -> object:
    """Check a dynamically typed value (e.g. a property) against a static type."""
    if ty == ANY:
        return value
    if ty.is_set:
        if not isinstance(value, VSet):
            raise EvalError(f"{what}: expected a set but got {display(value)}", pos)
        return VSet(conform(v, ty.elem, model, what, pos) for v in value) if ty.elem not in (ANY, EMPTY) else value  # type: ignore[arg-type]
    actual = type_of_value(value, model)
    if not is_subtype(actual, ty):
        raise EvalError(f"{what}: expected {ty} but got {actual} value {display(value)}", pos)
    return _coerce(value, ty)


def values_equal(a: object, b: object) -> bool:
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def _check_int(v: int, pos: Pos | None) -> int:
    if not INT_MIN <= v <= INT_MAX:
        raise EvalError(f"integer overflow: {v} does not fit in 64 bits", pos)
    return v


def _numeric(v: object, op: str, pos: Pos | None) -> int | float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EvalError(f"'{op}' expects numbers but got {display(v)}", pos)
    return v


def _arith(op: str, a: object, b: object, pos: Pos | None) -> object:
    x, y = _numeric(a, op, pos), _numeric(b, op, pos)
    both_int = type(x) is int and type(y) is int
    if op == "+":
        r = x + y
    elif op == "-":
        r = x - y
    elif op == "*":
        r = x * y
    else:
        if y == 0:
            raise EvalError("division by zero", pos)
        if both_int:
            q = abs(x) // abs(y)
            r = q if (x >= 0) == (y >= 0) else -q
        else:
            r = x / y
    return _check_int(r, pos) if both_int else float(r)


# ---------------------------------------------------------------------------
# Evaluation

def evaluate(e: Expr, env: Env) -> object:
    """Evaluate a typechecked expression."""
    v = _eval(e, env)
    ty = getattr(e, "ty", None)
    if ty is not None and (ty == REAL or (ty.is_set and ty.elem == REAL)):
        v = _coerce(v, ty)
    return v


def _eval(e: Expr, env: Env) -> object:
    if isinstance(e, Literal):
        return e.value
    if isinstance(e, Var):
        if e.name in env.vars:
            return env.vars[e.name]
        const = env.lib.constants.get(e.name)
        if const is not None:
            return conform(evaluate(const.expr, env.with_vars({})), const.type, env.model,
                           f"constant '{e.name}'", e.pos)
        raise EvalError(f"unbound variable '{e.name}'", e.pos)
    if isinstance(e, BinOp):
        op = e.op
        if op in ("and", "or"):
            left = evaluate(e.left, env)
            if not isinstance(left, bool):
                raise EvalError(f"'{op}' expects bool but got {display(left)}", e.pos)
            if (op == "and" and not left) or (op == "or" and left):
                return left
            right = evaluate(e.right, env)
            if not isinstance(right, bool):
                raise EvalError(f"'{op}' expects bool but got {display(right)}", e.pos)
            return right
        a, b = evaluate(e.left, env), evaluate(e.right, env)
        if op == "=":
            return values_equal(a, b)
        if op == "<>":
            return not values_equal(a, b)
        if op in ("<", "<=", ">", ">="):
            x, y = _numeric(a, op, e.pos), _numeric(b, op, e.pos)
            return {"<": x < y, "<=": x <= y, ">": x > y, ">=": x >= y}[op]
        return _arith(op, a, b, e.pos)
    if isinstance(e, UnOp):
        v = evaluate(e.operand, env)
        if e.op == "not":
            if not isinstance(v, bool):
                raise EvalError(f"'not' expects bool but got {display(v)}", e.pos)
            return not v
        n = _numeric(v, "-", e.pos)
        return _check_int(-n, e.pos) if type(n) is int else -n
    if isinstance(e, Call):
        return _call(e, env)
    if isinstance(e, SetLit):
        return VSet(evaluate(i, env) for i in e.items)
    if isinstance(e, Comprehension):
        out = []
        for x in domain_values(e.domain, env, e.pos):
            inner = env.bind(e.var, x)
            if e.cond is not None:
                c = evaluate(e.cond, inner)
                if not isinstance(c, bool):
                    raise EvalError(f"comprehension condition gave {display(c)}, not a bool", e.pos)
                if not c:
                    continue
            out.append(evaluate(e.element, inner))
        return VSet(out)
    if isinstance(e, IfExpr):
        c = evaluate(e.cond, env)
        if not isinstance(c, bool):
            raise EvalError(f"'if' condition gave {display(c)}, not a bool", e.pos)
        return evaluate(e.then if c else e.else_, env)
    raise AssertionError(f"unknown expression {e!r}")


def domain_values(domain, env: Env, pos: Pos | None = None) -> tuple:
    """Enumerate a quantifier or comprehension domain in document order."""
    if isinstance(domain, KindDomain):
        return instances_of(env.model, domain.kind)
    s = evaluate(domain.expr, env)
    if not isinstance(s, VSet):
        raise EvalError(f"'in' expects a set but got {display(s)}", pos)
    return s.items


def _call(e: Call, env: Env) -> object:
    name = e.name
    lib = env.lib
    if name in _BUILTINS:
        return _BUILTINS[name](e, env)
    args = [evaluate(a, env) for a in e.args]
    if name in lib.functions:
        f = lib.functions[name]
        bound = {p.name: conform(v, p.type, env.model, f"argument '{p.name}' of '{name}'", e.pos)
                 for p, v in zip(f.params, args)}
        result = evaluate(f.body, env.with_vars(bound))
        if f.return_type is not None:
            result = conform(result, f.return_type, env.model, f"result of '{name}'", e.pos)
        return result
    if name in lib.externals:
        x = lib.externals[name]
        args = [conform(v, p.type, env.model, f"argument '{p.name}' of '{name}'", e.pos)
                for p, v in zip(x.params, args)]
        try:
            return run_external(x, args, env.model, env.external_timeout)
        except EvalError as err:
            err.pos = err.pos or e.pos
            raise
    raise EvalError(f"unknown function '{name}'", e.pos)


# ---------------------------------------------------------------------------
# Built-in functions

def _ref_arg(v: object, fn: str, pos: Pos | None) -> ComponentRef | ConnectionRef | FeatureRef:
    if not isinstance(v, MODEL_REF_TYPES):
        raise EvalError(f"'{fn}' expects a model element but got {display(v)}", pos)
    return v


def _set_arg(v: object, fn: str, pos: Pos | None) -> VSet:
    if not isinstance(v, VSet):
        raise EvalError(f"'{fn}' expects a set but got {display(v)}", pos)
    return v


def _b_parent(e: Call, env: Env) -> object:
    ref = _ref_arg(evaluate(e.args[0], env), "parent", e.pos)
    if isinstance(ref, FeatureRef):
        return env.model.feature(ref).owner
    if isinstance(ref, ComponentRef):
        parent = env.model.component(ref).parent
        if parent is None:
            raise EvalError(f"'{ref.path}' is the root component and has no parent", e.pos)
        return parent
    raise EvalError(f"parent is not defined for connection '{ref.path}'", e.pos)


def _endpoint(which: str):
    def fn(e: Call, env: Env) -> object:
        ref = evaluate(e.args[0], env)
        if not isinstance(ref, ConnectionRef):
            raise EvalError(f"'{which}' expects a connection but got {display(ref)}", e.pos)
        conn = env.model.connection(ref)
        return conn.source if which == "source" else conn.destination
    return fn


def _b_name(e: Call, env: Env) -> object:
    ref = _ref_arg(evaluate(e.args[0], env), "name", e.pos)
    return ref.path.rsplit(".", 1)[-1]


def _property_args(e: Call, env: Env, fn: str) -> tuple[object, str]:
    ref = _ref_arg(evaluate(e.args[0], env), fn, e.pos)
    pname = evaluate(e.args[1], env)
    if not isinstance(pname, str):
        raise EvalError(f"'{fn}' expects a property name but got {display(pname)}", e.pos)
    return ref, pname


def _b_property(e: Call, env: Env) -> object:
    ref, pname = _property_args(e, env, "property")
    props = env.model.properties_of(ref)  # type: ignore[arg-type]
    if pname not in props:
        raise EvalError(f"'{ref.path}' has no property '{pname}' (use has_property first)", e.pos)  # type: ignore[union-attr]
    return property_to_value(props[pname])


def _b_has_property(e: Call, env: Env) -> object:
    ref, pname = _property_args(e, env, "has_property")
    return pname in env.model.properties_of(ref)  # type: ignore[arg-type]


def _b_member(e: Call, env: Env) -> object:
    x = evaluate(e.args[0], env)
    s = _set_arg(evaluate(e.args[1], env), "member", e.pos)
    return any(values_equal(x, y) for y in s) if isinstance(x, bool) else x in s


def _b_union(e: Call, env: Env) -> object:
    a = _set_arg(evaluate(e.args[0], env), "union", e.pos)
    b = _set_arg(evaluate(e.args[1], env), "union", e.pos)
    return a.union(b)


def _b_sum(e: Call, env: Env) -> object:
    s = _set_arg(evaluate(e.args[0], env), "sum", e.pos)
    real = any(type(v) is float for v in s) or e.ty == REAL
    total: int | float = 0.0 if real else 0
    for v in s:
        n = _numeric(v, "sum", e.pos)
        total = total + n
        if not real:
            _check_int(total, e.pos)  # type: ignore[arg-type]
    return total


def _b_size(e: Call, env: Env) -> object:
    return len(_set_arg(evaluate(e.args[0], env), "size", e.pos))


def _b_is_empty(e: Call, env: Env) -> object:
    return len(_set_arg(evaluate(e.args[0], env), "is_empty", e.pos)) == 0


def _b_debug(e: Call, env: Env) -> object:
    label = evaluate(e.args[0], env)
    value = evaluate(e.args[1], env)
    log.info("debug %s: %s", label, display(value))
    return value


_BUILTINS = {
    "parent": _b_parent,
    "source": _endpoint("source"),
    "destination": _endpoint("destination"),
    "name": _b_name,
    "property": _b_property,
    "has_property": _b_has_property,
    "member": _b_member,
    "union": _b_union,
    "sum": _b_sum,
    "size": _b_size,
    "is_empty": _b_is_empty,
    "debug": _b_debug,
}


# ---------------------------------------------------------------------------
# External tools

def default_timeout() -> float:
    raw = os.environ.get(TIMEOUT_ENV_VAR)
    if raw:
        try:
            return float(raw)
        except ValueError:
            log.warning("ignoring non-numeric %s=%r", TIMEOUT_ENV_VAR, raw)
    return DEFAULT_EXTERNAL_TIMEOUT


def encode_args(args: list[object]) -> str:
    """One JSON array on a single line; model elements travel as qualified paths."""
    return json.dumps([to_json(a) for a in args], separators=(",", ":"), ensure_ascii=False) + "\n"


def decode_result(obj: object, ty: Type, model: ModelInstance | None) -> object:
    if ty.name == "bool":
        if isinstance(obj, bool):
            return obj
    elif ty.name == "int":
        if isinstance(obj, int) and not isinstance(obj, bool) and INT_MIN <= obj <= INT_MAX:
            return obj
    elif ty.name == "real":
        if isinstance(obj, (int, float)) and not isinstance(obj, bool):
            return float(obj)
    elif ty.name == "string":
        if isinstance(obj, str):
            return obj
    elif ty.is_set:
        if isinstance(obj, list):
            return VSet(decode_result(o, ty.elem, model) for o in obj)  # type: ignore[arg-type]
    elif ty.is_model and isinstance(obj, str) and model is not None:
        try:
            ref = lookup_path(model, obj)
        except ResolveError as err:
            raise ValueError(err.message) from None
        kind = model.kind_of(ref)
        if ty.name == kind or (ty.name == "component" and kind in COMPONENT_KINDS):
            return ref
        raise ValueError(f"'{obj}' is a {kind}, not a {ty}")
    raise ValueError(f"{json.dumps(obj)} is not a {ty}")


def run_external(decl: ExternalDef, args: list[object], model: ModelInstance | None = None,
                 timeout: float | None = None) -> object:
    """Run an external analysis once and parse its verdict.

    The argument list is written to the child's stdin as one JSON line; the
    last non-empty stdout line is parsed as JSON and checked against the
    declared return type. Nothing is cached.
    """
    if len(args) != len(decl.params):
        raise EvalError(f"external '{decl.name}' expects {len(decl.params)} argument(s), got {len(args)}",
                        command=decl.command)
    timeout = default_timeout() if timeout is None else timeout
    payload = encode_args(args)
    try:
        argv = shlex.split(decl.command)
    except ValueError as err:
        raise EvalError(f"external '{decl.name}': malformed command {decl.command!r}: {err}",
                        command=decl.command) from None
    if not argv:
        raise EvalError(f"external '{decl.name}' has an empty command", command=decl.command)
    guard = nullcontext() if decl.stateless else _external_lock
    try:
        with guard:
            proc = subprocess.run(argv, input=payload, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        raise EvalError(f"external '{decl.name}' command {decl.command!r} timed out after {timeout:g} s",
                        command=decl.command) from None
    except OSError as err:
        raise EvalError(f"external '{decl.name}' command {decl.command!r} could not be started: {err}",
                        command=decl.command) from None
    if proc.returncode != 0:
        detail = proc.stderr.strip().splitlines()[-1] if proc.stderr.strip() else ""
        raise EvalError(f"external '{decl.name}' command {decl.command!r} exited with status {proc.returncode}"
                        + (f": {detail}" if detail else ""), command=decl.command, exit_code=proc.returncode)
    lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
    if not lines:
        raise EvalError(f"external '{decl.name}' command {decl.command!r} produced no output",
                        command=decl.command)
    try:
        return decode_result(json.loads(lines[-1]), decl.return_type, model)
    except ValueError as err:
        raise EvalError(f"external '{decl.name}' command {decl.command!r} printed unparseable output "
                        f"{lines[-1]!r}: {err}", command=decl.command) from None
