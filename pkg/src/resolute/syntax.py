"""Tokenizer and token cursor shared by the model and library parsers."""

from __future__ import annotations

import re
from dataclasses import dataclass


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int, filename: str | None = None):
        self.message = message
        self.line = line
        self.column = column
        self.filename = filename
        super().__init__(str(self))

    def __str__(self) -> str:
        return f"{self.filename or '<input>'}:{self.line}:{self.column}: {self.message}"


@dataclass(frozen=True)
class Pos:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INT, REAL, STRING, OP, EOF
    text: str
    pos: Pos
    value: object = None

    def is_op(self, *ops: str) -> bool:
        return self.kind == "OP" and self.text in ops

    def is_word(self, *words: str) -> bool:
        return self.kind == "IDENT" and self.text in words


# longest operators first so that `::` wins over `:` and so on
_OPERATORS = ["::", "->", "<=", ">=", "<>", "=>", "**",
              "{", "}", "(", ")", "[", "]", ",", ";", ":", ".", "=", "<", ">", "+", "-", "*", "/"]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<real>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op>""" + "|".join(re.escape(op) for op in _OPERATORS) + r""")
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


def _unescape(body: str, pos: Pos, filename: str | None) -> str:
    out = []
    chars = iter(body)
    for ch in chars:
        if ch != "\\":
            out.append(ch)
            continue
        esc = next(chars)
        if esc not in _ESCAPES:
            raise ParseError(f"unknown escape sequence '\\{esc}'", pos.line, pos.column, filename)
        out.append(_ESCAPES[esc])
    return "".join(out)


def tokenize(text: str, filename: str | None = None) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        pos = Pos(line, i - line_start + 1)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", pos.line, pos.column, filename)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "int":
            value = int(lexeme)
            if value > INT_MAX:
                raise ParseError(f"integer literal {lexeme} out of 64-bit range", pos.line, pos.column, filename)
            tokens.append(Token("INT", lexeme, pos, value))
        elif kind == "real":
            tokens.append(Token("REAL", lexeme, pos, float(lexeme)))
        elif kind == "ident":
            tokens.append(Token("IDENT", lexeme, pos))
        elif kind == "string":
            tokens.append(Token("STRING", lexeme, pos, _unescape(lexeme[1:-1], pos, filename)))
        elif kind == "op":
            tokens.append(Token("OP", lexeme, pos))
        i = m.end()
    tokens.append(Token("EOF", "", Pos(line, i - line_start + 1)))
    return tokens


class TokenStream:
    """Cursor over a token list with the usual peek/accept/expect helpers."""

    def __init__(self, tokens: list[Token], filename: str | None = None):
        self.tokens = tokens
        self.index = 0
        self.filename = filename

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.index + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.index]
        if tok.kind != "EOF":
            self.index += 1
        return tok

    def at_end(self) -> bool:
        return self.current.kind == "EOF"

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.current
        return ParseError(message, tok.pos.line, tok.pos.column, self.filename)

    def accept_op(self, *ops: str) -> Token | None:
        if self.current.is_op(*ops):
            return self.advance()
        return None

    def accept_word(self, *words: str) -> Token | None:
        if self.current.is_word(*words):
            return self.advance()
        return None

    def expect_op(self, op: str) -> Token:
        if not self.current.is_op(op):
            raise self.error(f"expected '{op}' but found {describe(self.current)}")
        return self.advance()

    def expect_word(self, word: str) -> Token:
        if not self.current.is_word(word):
            raise self.error(f"expected '{word}' but found {describe(self.current)}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.current.kind != kind:
            raise self.error(f"expected {what} but found {describe(self.current)}")
        return self.advance()


def describe(tok: Token) -> str:
    if tok.kind == "EOF":
        return "end of input"
    return f"'{tok.text}'"
