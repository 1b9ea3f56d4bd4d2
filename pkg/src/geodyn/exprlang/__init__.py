"""Metric expression language: lexer, parser, scalar and jet evaluation."""

from .ast import FUNCTIONS, BinOp, Call, Const, Expr, Neg, Var, depth, max_variable, pretty_print
from .compile import compile_jets
from .evaluate import Jet2, eval_jet2, eval_scalar
from .lexer import Token, tokenize
from .parser import parse

__all__ = [
    "FUNCTIONS", "BinOp", "Call", "Const", "Expr", "Neg", "Var", "Jet2", "Token",
    "compile_jets", "depth", "eval_jet2", "eval_scalar", "max_variable", "parse",
    "pretty_print", "tokenize",
]
