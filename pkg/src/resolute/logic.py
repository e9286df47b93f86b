"""Goal-directed proof search with tabling.

Claims are proven by backchaining through their rules in declaration
order. Every ground claim instance is tabled: a proven instance is reused
everywhere, and revisiting an instance that is still being proven counts as
a failure of that branch. The resulting verdicts are the least fixed point
of the rule set.

A failure that relied on such a cycle is only provisional: it was computed
assuming some still-open claims false. When one of those claims is proven
the failure is discarded; when it fails, the failure inherits that claim's
own open assumptions, and becomes final once none remain. Each instance is
therefore re-explored at most once per newly proven claim.
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, TypeVar

from .eval import Env, EvalError, conform, domain_values, evaluate
from .lang.ast import (
    And, ClaimApp, Domain, EvalAtom, Exists, Expr, Forall, Formula, Implies, Let, Or, format_expr,
)
from .lang.typecheck import Goal, TypedLibrary
from .model import ModelInstance
from .values import display

PROVEN = "proven"
FAILED = "failed"


# ---------------------------------------------------------------------------
# Proof trees

@dataclass(kw_only=True)
class ProofNode:
    status: str

    @property
    def proven(self) -> bool:
        return self.status == PROVEN


@dataclass(kw_only=True)
class EvalNode(ProofNode):
    expr: Expr
    value: bool


@dataclass(kw_only=True)
class ClaimNode(ProofNode):
    name: str
    args: tuple
    clause: Optional[int] = None  # global index of the rule that proved it
    children: list[ProofNode] = field(default_factory=list)
    cycle: bool = False  # failed because the instance was already being proven

    @property
    def key(self) -> tuple:
        return (self.name, self.args)

    @property
    def label(self) -> str:
        return claim_label(self.name, self.args)


@dataclass(kw_only=True)
class AndNode(ProofNode):
    children: list[ProofNode]


@dataclass(kw_only=True)
class OrNode(ProofNode):
    children: list[ProofNode]
    chosen: Optional[int] = None  # 0 = left, 1 = right


@dataclass(kw_only=True)
class ForallNode(ProofNode):
    var: str
    instances: tuple  # every instance when proven, the failing ones otherwise
    children: list[ProofNode]


@dataclass(kw_only=True)
class ExistsNode(ProofNode):
    var: str
    instances: tuple  # the witness when proven, every instance otherwise
    children: list[ProofNode]
    witness: Optional[int] = None  # position of the witness in the domain


@dataclass(kw_only=True)
class ImpliesNode(ProofNode):
    antecedent: Expr
    antecedent_value: bool
    child: Optional[ProofNode] = None


@dataclass(kw_only=True)
class LetNode(ProofNode):
    var: str
    value: object
    child: ProofNode


def children_of(node: ProofNode) -> list[ProofNode]:
    if isinstance(node, (ClaimNode, AndNode, OrNode, ForallNode, ExistsNode)):
        return node.children
    if isinstance(node, ImpliesNode):
        return [node.child] if node.child is not None else []
    if isinstance(node, LetNode):
        return [node.child]
    return []


def claim_label(name: str, args: tuple) -> str:
    return f"{name}({', '.join(display(a) for a in args)})"


# ---------------------------------------------------------------------------
# Search

@dataclass
class ProofContext:
    """The fixed rule base and model, plus the claim table shared by all goals of a run."""

    lib: TypedLibrary
    model: ModelInstance
    memo: dict[tuple, ClaimNode] = field(default_factory=dict)
    external_timeout: float | None = None

    def env(self, vars: dict | None = None) -> Env:
        return Env(self.model, self.lib, dict(vars or {}), self.external_timeout)


_NO_HITS: frozenset = frozenset()


class _Search:
    def __init__(self, ctx: ProofContext):
        self.ctx = ctx
        self.open: dict[tuple, int] = {}  # claim key -> activation id of its open frame
        self.next_id = 0
        # failures that assumed some open frames false: key -> (node, activation ids)
        self.provisional: dict[tuple, tuple[ClaimNode, set[int]]] = {}
        self.dependents: dict[int, set[tuple]] = {}  # activation id -> provisional keys relying on it

    # Each `prove_*` returns the node and the activation ids of open frames its
    # failure depended on. Proven nodes never depend on anything.

    def prove(self, f: Formula, env: Env) -> tuple[ProofNode, frozenset]:
        if isinstance(f, ClaimApp):
            return self.prove_claim(f, env)
        if isinstance(f, EvalAtom):
            v = evaluate(f.expr, env)
            if not isinstance(v, bool):
                raise EvalError(f"formula evaluated to {display(v)}, not a bool", getattr(f.expr, "pos", None),
                                expr=f.expr)
            return EvalNode(status=PROVEN if v else FAILED, expr=f.expr, value=v), _NO_HITS
        if isinstance(f, And):
            left, lh = self.prove(f.left, env)
            if not left.proven:
                return AndNode(status=FAILED, children=[left]), lh
            right, rh = self.prove(f.right, env)
            return AndNode(status=right.status, children=[left, right]), rh
        if isinstance(f, Or):
            left, lh = self.prove(f.left, env)
            if left.proven:
                return OrNode(status=PROVEN, children=[left], chosen=0), _NO_HITS
            right, rh = self.prove(f.right, env)
            if right.proven:
                return OrNode(status=PROVEN, children=[right], chosen=1), _NO_HITS
            return OrNode(status=FAILED, children=[left, right]), lh | rh
        if isinstance(f, Implies):
            v = evaluate(f.antecedent, env)
            if not isinstance(v, bool):
                raise EvalError(f"implication antecedent evaluated to {display(v)}, not a bool",
                                getattr(f.antecedent, "pos", None), expr=f.antecedent)
            if not v:
                return ImpliesNode(status=PROVEN, antecedent=f.antecedent, antecedent_value=False), _NO_HITS
            child, hits = self.prove(f.consequent, env)
            return ImpliesNode(status=child.status, antecedent=f.antecedent, antecedent_value=True,
                               child=child), hits
        if isinstance(f, Forall):
            failing, failing_nodes, hits = [], [], _NO_HITS
            domain = domain_values(f.domain, env, f.pos)
            nodes = []
            for x in domain:
                node, h = self.prove(f.body, env.bind(f.var, x))
                nodes.append(node)
                if not node.proven:
                    failing.append(x)
                    failing_nodes.append(node)
                    hits = hits | h
            if failing:
                return ForallNode(status=FAILED, var=f.var, instances=tuple(failing), children=failing_nodes), hits
            return ForallNode(status=PROVEN, var=f.var, instances=tuple(domain), children=nodes), _NO_HITS
        if isinstance(f, Exists):
            domain = domain_values(f.domain, env, f.pos)
            nodes, hits = [], _NO_HITS
            for i, x in enumerate(domain):
                node, h = self.prove(f.body, env.bind(f.var, x))
                if node.proven:
                    return ExistsNode(status=PROVEN, var=f.var, instances=(x,), children=[node], witness=i), _NO_HITS
                nodes.append(node)
                hits = hits | h
            return ExistsNode(status=FAILED, var=f.var, instances=tuple(domain), children=nodes), hits
        if isinstance(f, Let):
            value = conform(evaluate(f.expr, env), f.type, env.model, f"let '{f.var}'", f.pos)
            child, hits = self.prove(f.body, env.bind(f.var, value))
            return LetNode(status=child.status, var=f.var, value=value, child=child), hits
        raise AssertionError(f"unknown formula {f!r}")

    def prove_claim(self, f: ClaimApp, env: Env) -> tuple[ProofNode, frozenset]:
        lib = self.ctx.lib
        params = lib.claim_params[f.name]
        args = tuple(conform(evaluate(a, env), t, env.model, f"argument {i + 1} of claim '{f.name}'", f.pos)
                     for i, (a, t) in enumerate(zip(f.args, params)))
        return self.claim(f.name, args)

    def claim(self, name: str, args: tuple) -> tuple[ProofNode, frozenset]:
        key = (name, args)
        done = self.ctx.memo.get(key)
        if done is not None:
            return done, _NO_HITS
        if key in self.open:
            return ClaimNode(status=FAILED, name=name, args=args, cycle=True), frozenset([self.open[key]])
        cached = self.provisional.get(key)
        if cached is not None:
            return cached[0], frozenset(cached[1])

        aid = self.next_id
        self.next_id += 1
        self.open[key] = aid
        try:
            result, hits = self._backchain(name, args)
        except EvalError as err:
            if err.claim is None:
                err.claim = claim_label(name, args)
            raise
        finally:
            del self.open[key]
        return self._close(key, aid, result, hits - {aid})

    def _close(self, key: tuple, aid: int, result: ClaimNode, hits: frozenset) -> tuple[ProofNode, frozenset]:
        """Record a finished frame and update every failure that assumed it false.

        Proven: those failures are dropped and recomputed on demand.
        Failed on its own: they no longer depend on this frame, and any left
        depending on nothing become final.
        Failed under open assumptions: they inherit those assumptions.
        """
        dependents = self.dependents.pop(aid, set())
        if result.proven:
            self.ctx.memo[key] = result
            for k in dependents:
                self._drop(k)
            return result, _NO_HITS
        if hits:
            self.provisional[key] = (result, set(hits))
            for h in hits:
                self.dependents.setdefault(h, set()).add(key)
        else:
            self.ctx.memo[key] = result
        for k in dependents:
            entry = self.provisional.get(k)
            if entry is None:
                continue
            entry[1].discard(aid)
            entry[1].update(hits)
            for h in hits:
                self.dependents.setdefault(h, set()).add(k)
            if not entry[1]:
                del self.provisional[k]
                self.ctx.memo[k] = entry[0]
        return result, hits

    def _drop(self, key: tuple) -> None:
        entry = self.provisional.pop(key, None)
        if entry is not None:
            for h in entry[1]:
                self.dependents.get(h, set()).discard(key)

    def _backchain(self, name: str, args: tuple) -> tuple[ClaimNode, frozenset]:
        lib = self.ctx.lib
        attempts, hits = [], _NO_HITS
        for index, clause in lib.clauses_for(name):
            env = self.ctx.env({p.name: a for p, a in zip(clause.params, args)})
            body, h = self.prove(clause.body, env)
            if body.proven:
                return ClaimNode(status=PROVEN, name=name, args=args, clause=index, children=[body]), _NO_HITS
            attempts.append(body)
            hits = hits | h
        return ClaimNode(status=FAILED, name=name, args=args, children=attempts), hits


def prove(goal: Goal, ctx: ProofContext) -> ProofNode:
    """Search for a proof of `goal`; returns a proven tree or a failed attempt tree.

    EvalError propagates, annotated with the claim instance being proven.
    """
    node, _ = _Search(ctx).prove(goal.formula, ctx.env(goal.env))
    return node


def prove_claim(name: str, args: tuple, ctx: ProofContext) -> ClaimNode:
    node, _ = _Search(ctx).claim(name, tuple(args))
    return node  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# Independent re-check of a finished tree

@dataclass
class ReplayResult:
    ok: bool
    path: str = ""
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "valid" if self.ok else f"invalid at {self.path}: {self.reason}"


class _Invalid(Exception):
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason


class _Replay:
    def __init__(self, ctx: ProofContext):
        self.ctx = ctx
        # tabled subtrees are shared; check each once (per ancestor set if failed)
        self.checked: set = set()

    def fail(self, path: str, reason: str):
        raise _Invalid(path, reason)

    def status_is(self, node: ProofNode, expected: str, path: str) -> None:
        if node.status != expected:
            self.fail(path, f"status is {node.status}, expected {expected}")

    def claim(self, node: ProofNode, path: str, ancestors: frozenset) -> None:
        if not isinstance(node, ClaimNode):
            self.fail(path, f"expected a claim node, found {type(node).__name__}")
        lib = self.ctx.lib
        if node.name not in lib.claims:
            self.fail(path, f"unknown claim '{node.name}'")
        path = f"{path}/{node.label}"
        if node.cycle:
            self.status_is(node, FAILED, path)
            tabled = self.ctx.memo.get(node.key)
            if node.key not in ancestors and (tabled is None or tabled.proven):
                self.fail(path, "cycle leaf whose claim is neither being proven further up nor tabled as failed")
            if node.children:
                self.fail(path, "cycle leaf with children")
            return
        seen = id(node) if node.proven else (id(node), ancestors)
        if seen in self.checked:
            return
        inner = ancestors | {node.key}
        clauses = lib.clauses_for(node.name)
        if node.proven:
            if node.clause not in [i for i, _ in clauses]:
                self.fail(path, f"rule #{node.clause} is not a rule for '{node.name}'")
            if len(node.children) != 1:
                self.fail(path, "a proven claim needs exactly one body proof")
            clause = lib.clauses[node.clause]  # type: ignore[index]
            env = self.ctx.env({p.name: a for p, a in zip(clause.params, node.args)})
            self.formula(node.children[0], clause.body, env, f"{path}#rule{node.clause}", inner)
            self.status_is(node.children[0], PROVEN, path)
        else:
            if node.clause is not None:
                self.fail(path, "a failed claim cannot name a chosen rule")
            if len(node.children) != len(clauses):
                self.fail(path, f"{len(node.children)} recorded attempts for {len(clauses)} rules")
            for child, (i, clause) in zip(node.children, clauses):
                env = self.ctx.env({p.name: a for p, a in zip(clause.params, node.args)})
                self.formula(child, clause.body, env, f"{path}#rule{i}", inner)
                self.status_is(child, FAILED, f"{path}#rule{i}")
        self.checked.add(seen)

    def formula(self, node: ProofNode, f: Formula, env: Env, path: str, ancestors: frozenset) -> None:
        if isinstance(f, ClaimApp):
            if not isinstance(node, ClaimNode):
                self.fail(path, f"expected a claim node for {f.name}, found {type(node).__name__}")
            params = self.ctx.lib.claim_params[f.name]
            args = tuple(conform(evaluate(a, env), t, env.model, "claim argument") for a, t in zip(f.args, params))
            if node.name != f.name or node.args != args:
                self.fail(path, f"claim node {node.label} does not match {claim_label(f.name, args)}")
            self.claim(node, path, ancestors)
            return
        if isinstance(f, EvalAtom):
            if not isinstance(node, EvalNode):
                self.fail(path, f"expected an evaluation node, found {type(node).__name__}")
            if node.expr != f.expr:
                self.fail(path, f"evaluated '{format_expr(node.expr)}' but the rule says '{format_expr(f.expr)}'")
            v = evaluate(f.expr, env)
            if v != node.value:
                self.fail(path, f"'{format_expr(f.expr)}' evaluates to {display(v)}, recorded {display(node.value)}")
            self.status_is(node, PROVEN if v else FAILED, path)
            return
        if isinstance(f, And):
            if not isinstance(node, AndNode):
                self.fail(path, f"expected an 'and' node, found {type(node).__name__}")
            kids = node.children
            self.formula(kids[0], f.left, env, path + "/and.0", ancestors)
            if len(kids) == 1:
                self.status_is(node, FAILED, path)
                self.status_is(kids[0], FAILED, path + "/and.0")
                return
            if len(kids) != 2:
                self.fail(path, "an 'and' node has one or two children")
            self.status_is(kids[0], PROVEN, path + "/and.0")
            self.formula(kids[1], f.right, env, path + "/and.1", ancestors)
            self.status_is(node, kids[1].status, path)
            return
        if isinstance(f, Or):
            if not isinstance(node, OrNode):
                self.fail(path, f"expected an 'or' node, found {type(node).__name__}")
            if node.proven:
                if node.chosen not in (0, 1) or len(node.children) != 1:
                    self.fail(path, "a proven 'or' records exactly one chosen branch")
                branch = f.left if node.chosen == 0 else f.right
                self.formula(node.children[0], branch, env, f"{path}/or.{node.chosen}", ancestors)
                self.status_is(node.children[0], PROVEN, f"{path}/or.{node.chosen}")
            else:
                if len(node.children) != 2:
                    self.fail(path, "a failed 'or' records both branches")
                for i, (child, branch) in enumerate(zip(node.children, (f.left, f.right))):
                    self.formula(child, branch, env, f"{path}/or.{i}", ancestors)
                    self.status_is(child, FAILED, f"{path}/or.{i}")
            return
        if isinstance(f, Implies):
            if not isinstance(node, ImpliesNode):
                self.fail(path, f"expected an implication node, found {type(node).__name__}")
            if node.antecedent != f.antecedent:
                self.fail(path, "implication antecedent does not match the rule")
            v = evaluate(f.antecedent, env)
            if v != node.antecedent_value:
                self.fail(path, f"antecedent evaluates to {display(v)}, recorded {display(node.antecedent_value)}")
            if not v:
                if node.child is not None:
                    self.fail(path, "false antecedent with a recorded consequent")
                self.status_is(node, PROVEN, path)
                return
            if node.child is None:
                self.fail(path, "true antecedent without a consequent proof")
            self.formula(node.child, f.consequent, env, path + "/=>", ancestors)
            self.status_is(node, node.child.status, path)
            return
        if isinstance(f, (Forall, Exists)):
            expected_cls = ForallNode if isinstance(f, Forall) else ExistsNode
            if not isinstance(node, expected_cls):
                self.fail(path, f"expected {expected_cls.__name__}, found {type(node).__name__}")
            domain = domain_values(f.domain, env)
            if len(node.instances) != len(node.children):
                self.fail(path, "instances and children differ in number")
            universal = isinstance(f, Forall)
            if universal == node.proven:
                # proven forall or failed exists: every instance, in domain order
                if tuple(node.instances) != tuple(domain):
                    self.fail(path, "instances do not cover the domain")
            elif universal:
                if not node.instances:
                    self.fail(path, "a failed 'forall' must record a failing instance")
                for x in node.instances:
                    if x not in domain:
                        self.fail(path, f"{display(x)} is not in the domain")
            elif len(node.instances) != 1 or node.witness is None or not 0 <= node.witness < len(domain) \
                    or domain[node.witness] != node.instances[0]:
                self.fail(path, "a proven 'exists' records its witness")
            want = node.status
            for x, child in zip(node.instances, node.children):
                sub = f"{path}/{f.var}={display(x)}"
                self.formula(child, f.body, env.bind(f.var, x), sub, ancestors)
                self.status_is(child, want, sub)
            return
        if isinstance(f, Let):
            if not isinstance(node, LetNode) or node.var != f.var:
                self.fail(path, f"expected a let node for '{f.var}'")
            v = conform(evaluate(f.expr, env), f.type, env.model, f"let '{f.var}'")
            if v != node.value:
                self.fail(path, f"let '{f.var}' evaluates to {display(v)}, recorded {display(node.value)}")
            self.formula(node.child, f.body, env.bind(f.var, v), f"{path}/let {f.var}", ancestors)
            self.status_is(node, node.child.status, path)
            return
        raise AssertionError(f"unknown formula {f!r}")


def replay_check(node: ProofNode, ctx: ProofContext, goal: Goal | None = None) -> ReplayResult:
    """Re-verify every step of a proof or attempt tree without searching.

    With a goal, the tree is checked against the goal's formula; otherwise
    the root must be a claim node.
    """
    replay = _Replay(ctx)
    try:
        if goal is not None:
            replay.formula(node, goal.formula, ctx.env(goal.env), "", frozenset())
        else:
            replay.claim(node, "", frozenset())
    except _Invalid as bad:
        return ReplayResult(False, bad.path or "/", bad.reason)
    except EvalError as err:
        return ReplayResult(False, "/", f"evaluation error during replay: {err}")
    return ReplayResult(True)


# ---------------------------------------------------------------------------

T = TypeVar("T")


def run_with_deep_stack(fn: Callable[[], T], stack_mb: int = 512, recursion_limit: int = 200_000) -> T:
    """Run `fn` on a thread with a large stack, for deeply recursive models."""
    result: list = []
    error: list = []

    def target() -> None:
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, recursion_limit))
        try:
            result.append(fn())
        except BaseException as exc:  # re-raised on the calling thread
            error.append(exc)
        finally:
            sys.setrecursionlimit(old)

    old_size = threading.stack_size()
    threading.stack_size(stack_mb * 1024 * 1024)
    try:
        t = threading.Thread(target=target, name="resolute-prover")
        t.start()
    finally:
        threading.stack_size(old_size)
    t.join()
    if error:
        raise error[0]
    return result[0]
