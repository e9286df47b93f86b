"""Rule libraries: parsing, typechecking, and binding prove directives to goals."""

from .ast import Library, RuleClause, Type, merge_libraries
from .parser import parse_expression, parse_formula, parse_library
from .typecheck import (
    BUILTINS, Diagnostic, Goal, TypeCheckError, TypedLibrary, attach_prove_directives, typecheck,
)

__all__ = [
    "BUILTINS", "Diagnostic", "Goal", "Library", "RuleClause", "Type", "TypeCheckError", "TypedLibrary",
    "attach_prove_directives", "merge_libraries", "parse_expression", "parse_formula", "parse_library",
    "typecheck",
]
