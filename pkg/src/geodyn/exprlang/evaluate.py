"""Scalar and second-order jet evaluation of expression trees."""

from __future__ import annotations

import math
from dataclasses import dataclass
from collections.abc import Sequence

import numpy as np

from ..errors import DimensionMismatch, DomainError
from .ast import BinOp, Call, Const, Expr, Neg, Var, max_variable


def _check(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise DomainError(f"{what} produced a non-finite value")
    return x


def real_pow(a: float, b: float) -> float:
    """``a**b`` restricted to real results."""
    if float(b).is_integer():
        if a == 0.0 and b < 0:
            raise DomainError("zero raised to a negative power")
        try:
            return _check(a ** int(b), "power")
        except OverflowError as exc:
            raise DomainError("power overflow") from exc
    if a < 0.0:
        raise DomainError(f"non-integer power {b!r} of negative base {a!r}")
    if a == 0.0 and b < 0:
        raise DomainError("zero raised to a negative power")
    try:
        return _check(a ** b, "power")
    except OverflowError as exc:
        raise DomainError("power overflow") from exc


def unary_taylor(fn: str, u: float, order: int = 2) -> tuple[float, float, float]:
    """Value, first and second derivative of ``fn`` at ``u``.

    Derivatives are only computed (and only domain-checked) up to ``order``.
    """
    try:
        if fn == "sin":
            s, c = math.sin(u), math.cos(u)
            return s, c, -s
        if fn == "cos":
            s, c = math.sin(u), math.cos(u)
            return c, -s, -c
        if fn == "tan":
            t = math.tan(u)
            sec2 = 1.0 + t * t
            return _check(t, "tan"), sec2, 2.0 * t * sec2
        if fn == "exp":
            e = math.exp(u)
            return e, e, e
        if fn == "ln":
            if u <= 0.0:
                raise DomainError(f"ln of non-positive value {u!r}")
            if order == 0:
                return math.log(u), 0.0, 0.0
            return math.log(u), 1.0 / u, -1.0 / (u * u)
        if fn == "sqrt":
            if u < 0.0:
                raise DomainError(f"sqrt of negative value {u!r}")
            s = math.sqrt(u)
            if order == 0:
                return s, 0.0, 0.0
            if s == 0.0:
                raise DomainError("derivative of sqrt at 0")
            return s, 0.5 / s, -0.25 / (s * u)
        if fn == "abs":
            return abs(u), math.copysign(1.0, u) if u != 0.0 else 0.0, 0.0
    except OverflowError as exc:
        raise DomainError(f"{fn} overflow at {u!r}") from exc
    raise ValueError(f"unknown function {fn!r}")


def _powc_taylor(u: float, c: float) -> tuple[float, float, float]:
    """Value and derivatives of ``u**c`` for a constant exponent."""
    value = real_pow(u, c)
    d1 = c * real_pow(u, c - 1.0) if c != 0.0 else 0.0
    d2 = c * (c - 1.0) * real_pow(u, c - 2.0) if c * (c - 1.0) != 0.0 else 0.0
    return value, d1, d2


def eval_scalar(ast: Expr, point: Sequence[float]) -> float:
    """Evaluate ``ast`` over the reals at ``point``."""
    if max_variable(ast) >= len(point):
        raise DimensionMismatch(f"expression uses x{max_variable(ast) + 1} but point has {len(point)} entries")
    return _check(_scalar(ast, point), "expression")


def _scalar(node: Expr, x: Sequence[float]) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index])
    if isinstance(node, Neg):
        return -_scalar(node.child, x)
    if isinstance(node, Call):
        return unary_taylor(node.fn, _scalar(node.arg, x), order=0)[0]
    a = _scalar(node.left, x)
    b = _scalar(node.right, x)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0.0:
            raise DomainError("division by zero")
        return a / b
    return real_pow(a, b)


@dataclass(frozen=True)
class Jet2:
    """A value with its exact gradient and Hessian in ``n`` coordinates."""

    value: float
    grad: np.ndarray
    hess: np.ndarray

    @classmethod
    def constant(cls, value: float, n: int) -> "Jet2":
        return cls(float(value), np.zeros(n), np.zeros((n, n)))

    @classmethod
    def variable(cls, value: float, index: int, n: int) -> "Jet2":
        grad = np.zeros(n)
        grad[index] = 1.0
        return cls(float(value), grad, np.zeros((n, n)))

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.grad, -self.hess)

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    def __sub__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)

    def __mul__(self, other: "Jet2") -> "Jet2":
        a, b = self.value, other.value
        cross = np.outer(self.grad, other.grad)
        return Jet2(
            a * b,
            a * other.grad + b * self.grad,
            a * other.hess + b * self.hess + (cross + cross.T),
        )

    def __truediv__(self, other: "Jet2") -> "Jet2":
        if other.value == 0.0:
            raise DomainError("division by zero")
        b = other.value
        prod = self * other.apply(1.0 / b, -1.0 / (b * b), 2.0 / (b * b * b))
        return Jet2(self.value / b, prod.grad, prod.hess)

    def apply(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Chain rule for a scalar function with derivatives ``f0, f1, f2`` at ``value``."""
        return Jet2(f0, f1 * self.grad, f1 * self.hess + f2 * np.outer(self.grad, self.grad))

    def is_finite(self) -> bool:
        return math.isfinite(self.value) and bool(np.all(np.isfinite(self.grad))) and bool(
            np.all(np.isfinite(self.hess)))


def eval_jet2(ast: Expr, point: Sequence[float]) -> Jet2:
    """Forward-mode value, gradient and Hessian of ``ast`` at ``point``."""
    n = len(point)
    if max_variable(ast) >= n:
        raise DimensionMismatch(f"expression uses x{max_variable(ast) + 1} but point has {n} entries")
    jet = _jet(ast, [float(p) for p in point], n)
    if not jet.is_finite():
        raise DomainError("jet evaluation produced a non-finite value")
    return jet


def _jet(node: Expr, x: list[float], n: int) -> Jet2:
    if isinstance(node, Const):
        return Jet2.constant(node.value, n)
    if isinstance(node, Var):
        return Jet2.variable(x[node.index], node.index, n)
    if isinstance(node, Neg):
        return -_jet(node.child, x, n)
    if isinstance(node, Call):
        u = _jet(node.arg, x, n)
        return u.apply(*unary_taylor(node.fn, u.value))
    op = node.op
    if op == "^":
        base = _jet(node.left, x, n)
        if max_variable(node.right) < 0:
            return base.apply(*_powc_taylor(base.value, _scalar(node.right, x)))
        if base.value <= 0.0:
            raise DomainError("variable exponent requires a positive base")
        expo = _jet(node.right, x, n)
        p = real_pow(base.value, expo.value)
        # d/dw exp(w) = exp(w) = a**b at every order
        return (expo * base.apply(*unary_taylor("ln", base.value))).apply(p, p, p)
    a = _jet(node.left, x, n)
    b = _jet(node.right, x, n)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    return a / b
