"""Recursive-descent parser for rule libraries.

Top-level items::

    claim(x : component) <= ** "text " x " more text" ** formula
    fn(x : int, y : int) : int = expr          -- return type may be omitted
    const LIMIT : int = 10
    external [stateless] tool(s : system) : bool = "command line"

Formula precedence, loosest first: ``=>`` (right associative), ``or``,
``and``. ``forall``/``exists``/``let`` extend to the end of the enclosing
formula. A bare call in formula position parses as a claim application; the
typechecker turns calls of computations back into evaluation atoms.
"""

from __future__ import annotations

from ..syntax import ParseError, Token, TokenStream, tokenize
from .ast import (
    BASE_TYPES, MODEL_TYPES, And, BinOp, Call, ClaimApp, ClaimText, Comprehension, ConstDef,
    Domain, EvalAtom, Exists, Expr, ExternalDef, Forall, Formula, FunDef, IfExpr, Implies,
    KindDomain, Let, Library, Literal, Or, Param, RuleClause, SetDomain, SetLit, Type, UnOp, Var,
    set_of,
)

RESERVED = frozenset({
    "forall", "exists", "let", "and", "or", "not", "if", "then", "else", "for", "in",
    "true", "false", "const", "external",
})

_COMPARISONS = ("=", "<>", "<", "<=", ">", ">=")
_EXPR_CONTINUATIONS = _COMPARISONS + ("+", "-", "*", "/")


class _LibraryParser:
    def __init__(self, text: str, filename: str | None):
        self.filename = filename
        self.ts = TokenStream(tokenize(text, filename), filename)

    # -- helpers -------------------------------------------------------------

    def ident(self, what: str) -> Token:
        tok = self.ts.expect_kind("IDENT", what)
        if tok.text in RESERVED:
            raise self.ts.error(f"reserved word '{tok.text}' cannot be used as {what}", tok)
        return tok

    def type_(self) -> Type:
        ts = self.ts
        if ts.accept_op("{"):
            elem = self.type_()
            ts.expect_op("}")
            return set_of(elem)
        tok = ts.expect_kind("IDENT", "a type")
        if tok.text not in BASE_TYPES and tok.text not in MODEL_TYPES:
            raise ts.error(f"unknown type '{tok.text}'", tok)
        return Type(tok.text)

    def params(self) -> list[Param]:
        ts = self.ts
        ts.expect_op("(")
        out: list[Param] = []
        if ts.accept_op(")"):
            return out
        while True:
            name = self.ident("a parameter name")
            ts.expect_op(":")
            out.append(Param(name.text, self.type_()))
            if ts.accept_op(")"):
                return out
            ts.expect_op(",")

    # -- top level -------------------------------------------------------------

    def library(self) -> Library:
        ts = self.ts
        lib = Library()
        seen: dict[str, str] = {}

        def define(name: str, what: str, tok: Token) -> None:
            prior = seen.get(name)
            if prior is not None and not (prior == what == "claim"):
                lib.duplicates.append((name, tok.pos, self.filename))
            seen.setdefault(name, what)

        while not ts.at_end():
            tok = ts.current
            if tok.is_word("const"):
                ts.advance()
                name = self.ident("a constant name")
                ts.expect_op(":")
                ty = self.type_()
                ts.expect_op("=")
                define(name.text, "const", name)
                lib.constants.setdefault(name.text, ConstDef(name.text, ty, self.expr(), name.pos, self.filename))
            elif tok.is_word("external"):
                ts.advance()
                stateless = bool(ts.accept_word("stateless"))
                name = self.ident("an external name")
                params = self.params()
                ts.expect_op(":")
                ty = self.type_()
                ts.expect_op("=")
                cmd = ts.expect_kind("STRING", "a command string")
                define(name.text, "external", name)
                lib.externals.setdefault(name.text, ExternalDef(name.text, params, ty, cmd.value, stateless,
                                                                name.pos, self.filename))
            elif tok.kind == "IDENT":
                name = self.ident("a claim or function name")
                params = self.params()
                if ts.accept_op("<="):
                    desc = self.description()
                    body = self.formula()
                    define(name.text, "claim", name)
                    lib.clauses.append(RuleClause(name.text, params, desc, body, name.pos, self.filename))
                else:
                    ret = None
                    if ts.accept_op(":"):
                        ret = self.type_()
                    if not ts.accept_op("="):
                        raise ts.error(f"expected '<=' (claim rule), ':' or '=' (function) after the "
                                       f"parameters of '{name.text}' but found '{ts.current.text}'")
                    body_expr = self.expr()
                    define(name.text, "function", name)
                    lib.functions.setdefault(name.text, FunDef(name.text, params, ret, body_expr,
                                                               name.pos, self.filename))
            else:
                raise ts.error(f"expected a definition but found '{tok.text}'")
        return lib

    def description(self) -> ClaimText | None:
        ts = self.ts
        if not ts.accept_op("**"):
            return None
        segments: list[str | Expr] = []
        while not ts.accept_op("**"):
            if ts.at_end():
                raise ts.error("unterminated claim description: expected '**'")
            if ts.current.kind == "STRING":
                segments.append(ts.advance().value)  # type: ignore[arg-type]
            else:
                segments.append(self.expr())
        return ClaimText(segments)

    # -- formulas ------------------------------------------------------------

    def formula(self) -> Formula:
        ts = self.ts
        if ts.current.is_word("forall", "exists"):
            return self.quantified()
        if ts.current.is_word("let"):
            return self.let()
        start = ts.current
        left = self.disjunction()
        if ts.accept_op("=>"):
            antecedent = formula_to_expr(left)
            if antecedent is None:
                raise ts.error("the left side of '=>' must be a computation "
                               "(no quantifiers or let)", start)
            return Implies(antecedent, self.formula())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.ts.accept_word("or"):
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.formula_atom()
        while self.ts.accept_word("and"):
            left = And(left, self.formula_atom())
        return left

    def formula_atom(self) -> Formula:
        ts = self.ts
        tok = ts.current
        if tok.is_word("forall", "exists"):
            return self.quantified()
        if tok.is_word("let"):
            return self.let()
        if tok.is_op("("):
            ts.advance()
            inner = self.formula()
            ts.expect_op(")")
            if ts.current.is_op(*_EXPR_CONTINUATIONS):
                as_expr = formula_to_expr(inner)
                if as_expr is None:
                    raise ts.error("a parenthesised formula cannot be used as a value")
                return self.atom_from_expr(self.continue_expr(as_expr))
            return inner
        return self.atom_from_expr(self.not_expr())

    @staticmethod
    def atom_from_expr(expr: Expr) -> Formula:
        if isinstance(expr, Call):
            return ClaimApp(expr.name, expr.args, expr.pos)
        return EvalAtom(expr)

    def binders(self) -> list[tuple[str, Domain, Token]]:
        ts = self.ts
        out = []
        while ts.current.is_op("("):
            ts.advance()
            name = self.ident("a bound variable")
            if ts.accept_op(":"):
                tok = ts.expect_kind("IDENT", "a model type")
                if tok.text not in MODEL_TYPES:
                    raise ts.error(f"quantifiers range over model types or sets, not '{tok.text}'", tok)
                dom: Domain = KindDomain(tok.text)
            elif ts.accept_word("in"):
                dom = SetDomain(self.expr())
            else:
                raise ts.error("expected ':' or 'in' after the bound variable")
            ts.expect_op(")")
            out.append((name.text, dom, name))
        if not out:
            raise ts.error("expected '(' to start a quantifier binding")
        return out

    def quantified(self) -> Formula:
        ts = self.ts
        quant = ts.advance()
        binders = self.binders()
        ts.expect_op(".")
        body = self.formula()
        node_cls = Forall if quant.text == "forall" else Exists
        for name, dom, tok in reversed(binders):
            body = node_cls(name, dom, body, tok.pos)
        return body

    def let(self) -> Formula:
        ts = self.ts
        ts.expect_word("let")
        name = self.ident("a let-bound variable")
        ts.expect_op(":")
        ty = self.type_()
        ts.expect_op("=")
        value = self.expr()
        ts.expect_op(";")
        return Let(name.text, ty, value, self.formula(), name.pos)

    # -- expressions -----------------------------------------------------------

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while tok := self.ts.accept_word("or"):
            left = BinOp("or", left, self.and_expr(), tok.pos)
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while tok := self.ts.accept_word("and"):
            left = BinOp("and", left, self.not_expr(), tok.pos)
        return left

    def not_expr(self) -> Expr:
        if tok := self.ts.accept_word("not"):
            return UnOp("not", self.not_expr(), tok.pos)
        return self.comparison()

    def comparison(self) -> Expr:
        left = self.additive()
        if self.ts.current.is_op(*_COMPARISONS):
            tok = self.ts.advance()
            left = BinOp(tok.text, left, self.additive(), tok.pos)
            if self.ts.current.is_op(*_COMPARISONS):
                raise self.ts.error("comparisons do not chain; add parentheses")
        return left

    def continue_expr(self, left: Expr) -> Expr:
        """Finish a comparison whose left operand was already parsed."""
        ts = self.ts
        while ts.current.is_op("*", "/"):
            tok = ts.advance()
            left = BinOp(tok.text, left, self.unary(), tok.pos)
        while ts.current.is_op("+", "-"):
            tok = ts.advance()
            left = BinOp(tok.text, left, self.multiplicative(), tok.pos)
        if ts.current.is_op(*_COMPARISONS):
            tok = ts.advance()
            left = BinOp(tok.text, left, self.additive(), tok.pos)
        return left

    def additive(self) -> Expr:
        left = self.multiplicative()
        while self.ts.current.is_op("+", "-"):
            tok = self.ts.advance()
            left = BinOp(tok.text, left, self.multiplicative(), tok.pos)
        return left

    def multiplicative(self) -> Expr:
        left = self.unary()
        while self.ts.current.is_op("*", "/"):
            tok = self.ts.advance()
            left = BinOp(tok.text, left, self.unary(), tok.pos)
        return left

    def unary(self) -> Expr:
        if tok := self.ts.accept_op("-"):
            operand = self.unary()
            if isinstance(operand, Literal) and type(operand.value) in (int, float):
                return Literal(-operand.value, tok.pos)
            return UnOp("-", operand, tok.pos)
        return self.primary()

    def primary(self) -> Expr:
        ts = self.ts
        tok = ts.current
        if tok.kind in ("INT", "REAL", "STRING"):
            ts.advance()
            return Literal(tok.value, tok.pos)
        if tok.is_word("true", "false"):
            ts.advance()
            return Literal(tok.text == "true", tok.pos)
        if tok.is_word("if"):
            ts.advance()
            cond = self.expr()
            ts.expect_word("then")
            then = self.expr()
            ts.expect_word("else")
            return IfExpr(cond, then, self.expr(), tok.pos)
        if tok.is_op("("):
            ts.advance()
            inner = self.expr()
            ts.expect_op(")")
            return inner
        if tok.is_op("{"):
            return self.set_expr()
        if tok.kind == "IDENT":
            if tok.text in RESERVED:
                raise ts.error(f"unexpected reserved word '{tok.text}'")
            ts.advance()
            if ts.current.is_op("::"):
                # qualified property name, used as a string
                parts = [tok.text]
                while ts.accept_op("::"):
                    parts.append(ts.expect_kind("IDENT", "a property name segment").text)
                return Literal("::".join(parts), tok.pos)
            if ts.accept_op("("):
                args: list[Expr] = []
                if not ts.accept_op(")"):
                    args.append(self.expr())
                    while ts.accept_op(","):
                        args.append(self.expr())
                    ts.expect_op(")")
                return Call(tok.text, args, tok.pos)
            return Var(tok.text, tok.pos)
        raise ts.error(f"expected an expression but found '{tok.text or 'end of input'}'")

    def set_expr(self) -> Expr:
        ts = self.ts
        start = ts.expect_op("{")
        if ts.accept_op("}"):
            return SetLit([], start.pos)
        first = self.expr()
        if ts.accept_word("for"):
            ts.expect_op("(")
            name = self.ident("a bound variable")
            if ts.accept_op(":"):
                kind = ts.expect_kind("IDENT", "a model type")
                if kind.text not in MODEL_TYPES:
                    raise ts.error(f"comprehensions range over model types or sets, not '{kind.text}'", kind)
                dom: Domain = KindDomain(kind.text)
            else:
                ts.expect_word("in")
                dom = SetDomain(self.expr())
            ts.expect_op(")")
            cond = self.expr() if ts.accept_word("if") else None
            ts.expect_op("}")
            return Comprehension(first, name.text, dom, cond, start.pos)
        items = [first]
        while ts.accept_op(","):
            items.append(self.expr())
        ts.expect_op("}")
        return SetLit(items, start.pos)


def formula_to_expr(f: Formula) -> Expr | None:
    """Reinterpret a quantifier-free formula as a boolean expression."""
    if isinstance(f, EvalAtom):
        return f.expr
    if isinstance(f, ClaimApp):
        return Call(f.name, f.args, f.pos)
    if isinstance(f, (And, Or)):
        left, right = formula_to_expr(f.left), formula_to_expr(f.right)
        if left is None or right is None:
            return None
        return BinOp("and" if isinstance(f, And) else "or", left, right)
    return None


def parse_library(source_text: str, filename: str | None = None) -> Library:
    """Parse one library file. Raises ParseError on the first syntax error."""
    return _LibraryParser(source_text, filename).library()


def parse_expression(source_text: str) -> Expr:
    p = _LibraryParser(source_text, None)
    e = p.expr()
    if not p.ts.at_end():
        raise p.ts.error(f"unexpected '{p.ts.current.text}' after expression")
    return e


def parse_formula(source_text: str) -> Formula:
    p = _LibraryParser(source_text, None)
    f = p.formula()
    if not p.ts.at_end():
        raise p.ts.error(f"unexpected '{p.ts.current.text}' after formula")
    return f


__all__ = ["ParseError", "RESERVED", "parse_library", "parse_expression", "parse_formula", "formula_to_expr"]
