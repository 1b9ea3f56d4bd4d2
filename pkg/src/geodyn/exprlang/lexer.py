from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Literal

from ..errors import LexError

TokenKind = Literal["number", "identifier", "operator", "paren", "comma"]

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_OPERATORS = "+-*/^"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    position: int  # byte offset into the UTF-8 encoded source


def tokenize(src: str) -> list[Token]:
    """Split ``src`` into tokens, rejecting any character outside the grammar."""
    tokens: list[Token] = []
    i = 0
    n = len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c.isascii() and (c.isdigit() or c == "."):
            m = _NUMBER.match(src, i)
            if m is None:
                raise LexError(_byte_offset(src, i), c)
            kind: TokenKind = "number"
        elif c.isascii() and (c.isalpha() or c == "_"):
            m = _IDENT.match(src, i)
            kind = "identifier"
        elif c in _OPERATORS:
            m = None
            kind = "operator"
        elif c in "()":
            m = None
            kind = "paren"
        elif c == ",":
            m = None
            kind = "comma"
        else:
            raise LexError(_byte_offset(src, i), c)
        lexeme = m.group() if m is not None else c
        tokens.append(Token(kind, lexeme, _byte_offset(src, i)))
        i += len(lexeme)
    return tokens


def _byte_offset(src: str, index: int) -> int:
    return len(src[:index].encode("utf-8"))
