"""Assurance cases from architecture models and rule libraries."""

from .lang import (
    Goal, Library, TypeCheckError, TypedLibrary, attach_prove_directives, merge_libraries, parse_library,
    typecheck,
)
from .model import ModelError, ModelInstance, ResolveError, instances_of, parse_model, resolve_reference
from .syntax import ParseError
from .logic import ProofContext, ProofNode, prove, replay_check
from .case import AssuranceCase, AssuranceNode, build_case, parse_case_json, render_dot, render_json, render_text
from .stdlib import stdlib_source

__version__ = "0.1.0"

__all__ = [
    "AssuranceCase", "AssuranceNode", "ProofContext", "ProofNode", "build_case", "parse_case_json", "prove",
    "render_dot", "render_json", "render_text", "replay_check", "stdlib_source",
    "Goal", "Library", "ModelError", "ModelInstance", "ParseError", "ResolveError", "TypeCheckError",
    "TypedLibrary", "attach_prove_directives", "instances_of", "merge_libraries", "parse_library",
    "parse_model", "resolve_reference", "typecheck",
]
