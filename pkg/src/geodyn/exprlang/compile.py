"""Compile expression trees into straight-line Python jet evaluators.

The generated code applies the same forward-mode rules as :class:`Jet2` but
tracks structural zeros at compile time, so a component that only depends
on ``x2`` never touches the other gradient slots.  Metric evaluation inside
the integrators goes through this path; :func:`eval_jet2` remains the
reference it is tested against.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Callable

from ..errors import DomainError
from .ast import BinOp, Call, Const, Expr, Neg, Var, max_variable
from .evaluate import _powc_taylor, _scalar, real_pow, unary_taylor

JetFunction = Callable[[Sequence[float]], tuple[list, list, list]]


class _Gen:
    def __init__(self, n: int, order: int):
        self.n = n
        self.order = order
        self.lines: list[str] = []
        self.count = 0

    def tmp(self, expr: str) -> str:
        name = f"t{self.count}"
        self.count += 1
        self.lines.append(f"    {name} = {expr}")
        return name

    @staticmethod
    def prod(*factors: str) -> str:
        kept = [f for f in factors if f != "1.0"]
        return " * ".join(kept) if kept else "1.0"

    def pairs(self):
        return [(k, l) for k in range(self.n) for l in range(k, self.n)]

    # each node yields (value, {k: grad}, {(k, l): hess}) with only non-zero entries
    def node(self, node: Expr):
        if isinstance(node, Const):
            return repr(float(node.value)), {}, {}
        if isinstance(node, Var):
            return f"x[{node.index}]", {node.index: "1.0"}, {}
        if isinstance(node, Neg):
            v, g, h = self.node(node.child)
            return (self.tmp(f"-{v}"),
                    {k: self.tmp(f"-{e}") for k, e in g.items()},
                    {k: self.tmp(f"-{e}") for k, e in h.items()})
        if isinstance(node, Call):
            u = self.node(node.arg)
            f = self.tmp(f"_ut({node.fn!r}, {u[0]}, {self.order})")
            return self.chain(u, f)
        if node.op == "^":
            base = self.node(node.left)
            if max_variable(node.right) < 0:
                c = repr(float(_scalar(node.right, ())))
                f = self.tmp(f"_pc({base[0]}, {c})")
                return self.chain(base, f)
            expo = self.node(node.right)
            lnb = self.tmp(f"_ut('ln', _pos({base[0]}), {self.order})")
            prod = self.mul(expo, self.chain(base, lnb))
            p = self.tmp(f"_rp({base[0]}, {expo[0]})")
            f = self.tmp(f"({p}, {p}, {p})")
            return self.chain(prod, f)
        a = self.node(node.left)
        b = self.node(node.right)
        if node.op in "+-":
            return self.addsub(a, b, node.op)
        if node.op == "*":
            return self.mul(a, b)
        # a / b as a * (1/b) with the value taken from the true quotient
        r = self.tmp(f"1.0 / {b[0]}")
        r1 = self.tmp(f"-{r} * {r}")
        r2 = self.tmp(f"-2.0 * {r} * {r1}")
        recip = self.chain(b, self.tmp(f"({r}, {r1}, {r2})"))
        _, g, h = self.mul(a, recip)
        return self.tmp(f"{a[0]} / {b[0]}"), g, h

    def chain(self, u, f: str):
        v, g, h = u
        val = self.tmp(f"{f}[0]")
        f1 = self.tmp(f"{f}[1]")
        grad = {k: self.tmp(self.prod(f1, e)) for k, e in g.items()}
        hess = {}
        if self.order >= 2:
            f2 = self.tmp(f"{f}[2]")
            for k, l in self.pairs():
                terms = []
                if (k, l) in h:
                    terms.append(self.prod(f1, h[(k, l)]))
                if k in g and l in g:
                    terms.append(self.prod(f2, g[k], g[l]))
                if terms:
                    hess[(k, l)] = self.tmp(" + ".join(terms))
        return val, grad, hess

    def addsub(self, a, b, op: str):
        def combine(da, db):
            out = {}
            for k in sorted(set(da) | set(db), key=str):
                if k in da and k in db:
                    out[k] = self.tmp(f"{da[k]} {op} {db[k]}")
                elif k in da:
                    out[k] = da[k]
                else:
                    out[k] = self.tmp(f"-{db[k]}") if op == "-" else db[k]
            return out
        return self.tmp(f"{a[0]} {op} {b[0]}"), combine(a[1], b[1]), combine(a[2], b[2])

    def mul(self, a, b):
        va, ga, ha = a
        vb, gb, hb = b
        grad = {}
        for k in range(self.n):
            terms = []
            if k in gb:
                terms.append(self.prod(va, gb[k]))
            if k in ga:
                terms.append(self.prod(vb, ga[k]))
            if terms:
                grad[k] = self.tmp(" + ".join(terms))
        hess = {}
        if self.order >= 2:
            for k, l in self.pairs():
                terms = []
                if (k, l) in hb:
                    terms.append(self.prod(va, hb[(k, l)]))
                if (k, l) in ha:
                    terms.append(self.prod(vb, ha[(k, l)]))
                cross = []
                if k in ga and l in gb:
                    cross.append(self.prod(ga[k], gb[l]))
                if l in ga and k in gb:
                    cross.append(self.prod(ga[l], gb[k]))
                if cross:
                    terms.append("(" + " + ".join(cross) + ")")
                if terms:
                    hess[(k, l)] = self.tmp(" + ".join(terms))
        return self.tmp(self.prod(va, vb)), grad, hess


def _positive(u: float) -> float:
    if u <= 0.0:
        raise DomainError("variable exponent requires a positive base")
    return u


def compile_jets(asts: Sequence[Expr], dim: int, order: int = 2) -> JetFunction:
    """Build ``f(x) -> (values, grads, hessians)`` for several expressions.

    ``grads`` is flat with length ``len(asts) * dim``; ``hessians`` is flat
    with length ``len(asts) * dim * dim`` (empty when ``order < 2``).
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    gen = _Gen(dim, order)
    vals, grads, hess = [], [], []
    for ast in asts:
        if max_variable(ast) >= dim:
            raise ValueError(f"expression uses x{max_variable(ast) + 1} in dimension {dim}")
        v, g, h = gen.node(ast)
        vals.append(v)
        if order >= 1:
            grads.extend(g.get(k, "0.0") for k in range(dim))
        if order >= 2:
            for k in range(dim):
                for l in range(dim):
                    hess.append(h.get((min(k, l), max(k, l)), "0.0"))
    body = "\n".join(gen.lines) or "    pass"
    src = (
        "def _jets(x):\n"
        f"{body}\n"
        f"    return [{', '.join(vals)}], [{', '.join(grads)}], [{', '.join(hess)}]\n"
    )
    namespace = {"_ut": unary_taylor, "_pc": _powc_taylor, "_rp": real_pow, "_pos": _positive}
    exec(compile(src, "<geodyn-jets>", "exec"), namespace)
    raw = namespace["_jets"]

    def jets(x: Sequence[float]):
        try:
            out = raw(x)
        except ZeroDivisionError as exc:
            raise DomainError("division by zero") from exc
        except (ValueError, OverflowError) as exc:
            raise DomainError(str(exc)) from exc
        total = sum(out[0]) + sum(out[1]) + sum(out[2])
        if total - total != 0.0 and not all(map(math.isfinite, out[0] + out[1] + out[2])):
            raise DomainError("jet evaluation produced a non-finite value")
        return out

    jets.source = src  # type: ignore[attr-defined]
    return jets
