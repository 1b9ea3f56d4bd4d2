"""Recursive-descent parser for the metric expression language.

Grammar (see docs/GRAMMAR.md)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

``^`` binds tighter than unary minus (``-x^2 == -(x^2)``) and is
right-associative because its right operand re-enters ``unary``.
"""

from __future__ import annotations

import math
import re
from collections.abc import Mapping, Sequence

from ..errors import ParseError, UnknownVariable
from .ast import FUNCTIONS, BinOp, Call, Const, Expr, Neg, Var
from .lexer import Token, tokenize

DEFAULT_CONSTANTS = {"pi": math.pi}

_INDEXED = re.compile(r"x([1-9][0-9]*)")


class _Parser:
    def __init__(self, src: str, tokens: list[Token], names: dict[str, int],
                 constants: Mapping[str, float], dim: int):
        self.src = src
        self.tokens = tokens
        self.pos = 0
        self.names = names
        self.constants = constants
        self.dim = dim

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def end_position(self) -> int:
        return len(self.src.encode("utf-8"))

    def expect(self, lexeme: str) -> Token:
        tok = self.peek()
        if tok is None or tok.lexeme != lexeme:
            self.fail(repr(lexeme))
        self.pos += 1
        return tok

    def fail(self, expected: str):
        tok = self.peek()
        if tok is None:
            raise ParseError(self.end_position(), expected, "end of input")
        raise ParseError(tok.position, expected, tok.lexeme)

    def parse(self) -> Expr:
        node = self.expr()
        if self.peek() is not None:
            self.fail("operator or end of input")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while (tok := self.peek()) is not None and tok.lexeme in ("+", "-"):
            self.pos += 1
            node = BinOp(tok.lexeme, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while (tok := self.peek()) is not None and tok.lexeme in ("*", "/"):
            self.pos += 1
            node = BinOp(tok.lexeme, node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.lexeme == "-":
            self.pos += 1
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok is not None and tok.lexeme == "^":
            self.pos += 1
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok is None:
            self.fail("number, name or '('")
        if tok.kind == "number":
            self.pos += 1
            value = float(tok.lexeme)
            if not math.isfinite(value):
                raise ParseError(tok.position, "finite number", tok.lexeme)
            return Const(value)
        if tok.lexeme == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "identifier":
            self.pos += 1
            nxt = self.peek()
            if nxt is not None and nxt.lexeme == "(":
                if tok.lexeme not in FUNCTIONS:
                    raise ParseError(tok.position, "one of " + ", ".join(FUNCTIONS), tok.lexeme)
                self.pos += 1
                arg = self.expr()
                self.expect(")")
                return Call(tok.lexeme, arg)
            return self.name(tok)
        self.fail("number, name or '('")

    def name(self, tok: Token) -> Expr:
        if tok.lexeme in self.names:
            return Var(self.names[tok.lexeme])
        if tok.lexeme in self.constants:
            return Const(float(self.constants[tok.lexeme]))
        raise UnknownVariable(tok.lexeme, tok.position, self.dim)


def parse(src: str, dim: int, variables: Sequence[str] | None = None,
          constants: Mapping[str, float] | None = None) -> Expr:
    """Parse ``src`` into an expression over ``dim`` coordinates.

    Coordinates are always reachable as ``x1..x{dim}``; ``variables`` binds
    additional names (e.g. ``("r", "theta")``) to the same slots, in order.
    ``constants`` maps further names to numeric values and is merged over
    ``pi``.
    """
    if dim < 0:
        raise ValueError("dim must be non-negative")
    names = {f"x{i + 1}": i for i in range(dim)}
    if variables is not None:
        if len(variables) != dim:
            raise ValueError(f"{len(variables)} variable names for dimension {dim}")
        for i, name in enumerate(variables):
            names[name] = i
    consts = dict(DEFAULT_CONSTANTS)
    if constants:
        consts.update(constants)
    tokens = tokenize(src)
    # xN beyond the chart is an UnknownVariable rather than an unbound name
    for tok in tokens:
        if tok.kind == "identifier" and tok.lexeme not in names and tok.lexeme not in consts:
            m = _INDEXED.fullmatch(tok.lexeme)
            if m is not None and int(m.group(1)) > dim:
                raise UnknownVariable(tok.lexeme, tok.position, dim)
    return _Parser(src, tokens, names, consts, dim).parse()
