"""Assurance cases: claim-only views of proof trees, and their renderings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .eval import evaluate
from .logic import FAILED, PROVEN, ClaimNode, ProofContext, ProofNode, children_of, claim_label
from .model import ProveDirective
from .values import display, model_refs


@dataclass
class AssuranceNode:
    text: str
    predicate: str
    args: list[str]
    status: str
    refs: list[str] = field(default_factory=list)
    children: list[AssuranceNode] = field(default_factory=list)

    @property
    def proven(self) -> bool:
        return self.status == PROVEN

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass
class AssuranceCase:
    goal: dict[str, str]  # {"component": path, "claim": application text}
    root: AssuranceNode
    verdict: str

    @property
    def header(self) -> str:
        prefix = "PROVEN" if self.verdict == PROVEN else "FAILED"
        return f"{prefix}: {self.goal['claim']} [{self.goal['component']}]"


def claim_text(node: ClaimNode, ctx: ProofContext) -> str:
    """Instantiate the description of the rule that proved the claim.

    Failed claims use the first rule's description. Rules without a
    description fall back to the claim application itself.
    """
    clauses = ctx.lib.clauses_for(node.name)
    if node.proven and node.clause is not None:
        clause = ctx.lib.clauses[node.clause]
    else:
        clause = clauses[0][1]
    if clause.description is None:
        return node.label
    env = ctx.env({p.name: a for p, a in zip(clause.params, node.args)})
    parts = []
    for seg in clause.description.segments:
        parts.append(seg if isinstance(seg, str) else display(evaluate(seg, env)))
    return "".join(parts)


def _claim_children(node: ProofNode) -> list[ClaimNode]:
    out: list[ClaimNode] = []
    for child in children_of(node):
        if isinstance(child, ClaimNode):
            out.append(child)
        else:
            out.extend(_claim_children(child))
    return out


def _build(node: ClaimNode, ctx: ProofContext, cache: dict[int, AssuranceNode]) -> AssuranceNode:
    # Tabled subproofs are shared between branches; so are their case nodes.
    hit = cache.get(id(node))
    if hit is not None:
        return hit
    refs: list[str] = []
    for a in node.args:
        refs.extend(model_refs(a))
    built = AssuranceNode(
        text=claim_text(node, ctx),
        predicate=node.name,
        args=[display(a) for a in node.args],
        status=node.status,
        refs=list(dict.fromkeys(refs)),
        children=[_build(c, ctx, cache) for c in _claim_children(node)],
    )
    cache[id(node)] = built
    return built


def build_case(proof: ProofNode, directive: ProveDirective | None, ctx: ProofContext,
               cache: dict[int, AssuranceNode] | None = None) -> AssuranceCase:
    """Collapse a proof or attempt tree to its claims.

    `cache` may be shared across the cases of one run, while the proof
    trees it was filled from are alive.
    """
    cache = {} if cache is None else cache
    if isinstance(proof, ClaimNode):
        root = _build(proof, ctx, cache)
        claim = directive.text if directive is not None else proof.label
    else:
        # goal that is not a single claim: a synthetic root over its claims
        claim = directive.text if directive is not None else "goal"
        root = AssuranceNode(claim, "", [], proof.status,
                             children=[_build(c, ctx, cache) for c in _claim_children(proof)])
    component = directive.component.path if directive is not None else ctx.model.root.path
    return AssuranceCase({"component": component, "claim": claim}, root, root.status)


# ---------------------------------------------------------------------------
# Rendering

def render_text(case: AssuranceCase) -> str:
    lines = [case.header]

    def emit(node: AssuranceNode, depth: int) -> None:
        mark = "+ " if node.proven else "! "
        lines.append("  " * depth + mark + node.text)
        for c in node.children:
            emit(c, depth + 1)

    emit(case.root, 0)
    return "\n".join(lines) + "\n"


def _node_dict(node: AssuranceNode) -> dict:
    return {
        "text": node.text,
        "predicate": node.predicate,
        "args": list(node.args),
        "status": node.status,
        "refs": list(node.refs),
        "children": [_node_dict(c) for c in node.children],
    }


def case_to_dict(case: AssuranceCase) -> dict:
    return {"goal": dict(case.goal), "verdict": case.verdict, "root": _node_dict(case.root)}


def render_json(case: AssuranceCase) -> str:
    return json.dumps(case_to_dict(case), separators=(",", ":"), ensure_ascii=False)


def render_json_cases(cases: list[AssuranceCase]) -> str:
    return json.dumps([case_to_dict(c) for c in cases], separators=(",", ":"), ensure_ascii=False)


def _node_from_dict(d: dict) -> AssuranceNode:
    if d.get("status") not in (PROVEN, FAILED):
        raise ValueError(f"bad node status {d.get('status')!r}")
    return AssuranceNode(
        text=d["text"], predicate=d["predicate"], args=list(d["args"]), status=d["status"],
        refs=list(d["refs"]), children=[_node_from_dict(c) for c in d["children"]],
    )


def case_from_dict(d: dict) -> AssuranceCase:
    return AssuranceCase(dict(d["goal"]), _node_from_dict(d["root"]), d["verdict"])


def parse_case_json(text: str) -> AssuranceCase:
    return case_from_dict(json.loads(text))


def _dot_string(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def render_dot(case: AssuranceCase) -> str:
    """One goal per node; ids encode the child-index path from the root."""
    lines = ["digraph assurance_case {", "  node [shape=box];",
             f"  label={_dot_string(case.header)};"]
    edges: list[str] = []

    def emit(node: AssuranceNode, ident: str) -> None:
        attrs = [f"label={_dot_string(node.text)}"]
        if not node.proven:
            attrs.append("style=dashed")
        lines.append(f"  {ident} [{', '.join(attrs)}];")
        for i, c in enumerate(node.children):
            child = f"{ident}_{i}"
            edges.append(f"  {ident} -> {child};")
            emit(c, child)

    emit(case.root, "n0")
    return "\n".join(lines + edges + ["}"]) + "\n"


__all__ = [
    "AssuranceCase", "AssuranceNode", "build_case", "case_from_dict", "case_to_dict", "claim_label", "claim_text",
    "parse_case_json", "render_dot", "render_json", "render_json_cases", "render_text",
]
