"""Immutable expression tree for metric component formulas."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "abs")
BINARY_OPS = ("+", "-", "*", "/", "^")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # zero-based coordinate index; printed as x{index+1}


@dataclass(frozen=True)
class Neg:
    child: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Const, Var, Neg, BinOp, Call]


def pretty_print(node: Expr) -> str:
    """Fully parenthesized source text that parses back to the same tree."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        return f"(-{pretty_print(node.child)})"
    if isinstance(node, BinOp):
        return f"({pretty_print(node.left)} {node.op} {pretty_print(node.right)})"
    if isinstance(node, Call):
        return f"{node.fn}({pretty_print(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def max_variable(node: Expr) -> int:
    """Largest zero-based variable index used, or -1 for a closed expression."""
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Const):
        return -1
    if isinstance(node, (Neg,)):
        return max_variable(node.child)
    if isinstance(node, Call):
        return max_variable(node.arg)
    return max(max_variable(node.left), max_variable(node.right))


def depth(node: Expr) -> int:
    if isinstance(node, (Const, Var)):
        return 1
    if isinstance(node, Neg):
        return 1 + depth(node.child)
    if isinstance(node, Call):
        return 1 + depth(node.arg)
    return 1 + max(depth(node.left), depth(node.right))
