"""Arithmetic expressions for coefficients and data in experiment configs.

Grammar (precedence low to high)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := number | name | func '(' expr ')' | '(' expr ')'
    func   := ln | log | exp | cos | sin | tan | sqrt | abs
    name   := x1 .. xn | r | pi | e

``r`` is the Euclidean norm of the position.  The source is rewritten to a
Python expression (``^`` becomes ``**``) and the syntax tree is checked
against this whitelist before compiling, so nothing else can be evaluated.
"""
from __future__ import annotations

import ast
import math
import re

import numpy as np

FUNCTIONS = {
    "ln": np.log, "log": np.log, "exp": np.exp, "cos": np.cos, "sin": np.sin,
    "tan": np.tan, "sqrt": np.sqrt, "abs": np.abs,
}
CONSTANTS = {"pi": math.pi, "e": math.e}
_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
            ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)
_COORD = re.compile(r"^x([1-9][0-9]*)$")


class ExpressionError(ValueError):
    pass


class Expression:
    """Compiled scalar expression in the coordinates ``x1..xn``."""

    def __init__(self, source: str, n: int):
        if not isinstance(source, str) or not source.strip():
            raise ExpressionError("expression must be a nonempty string")
        self.source = source
        self.n = n
        if "**" in source:
            raise ExpressionError(f"{source!r}: use '^' for powers")
        text = source.replace("^", "**")
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED):
                raise ExpressionError(f"{source!r}: {type(node).__name__} is not allowed")
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ExpressionError(f"{source!r}: only numeric literals are allowed")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                    raise ExpressionError(f"{source!r}: unknown function")
                if len(node.args) != 1 or node.keywords:
                    raise ExpressionError(f"{source!r}: functions take one argument")
            if isinstance(node, ast.Name) and node.id not in FUNCTIONS:
                m = _COORD.match(node.id)
                if node.id in CONSTANTS or node.id == "r":
                    continue
                if not m or int(m.group(1)) > n:
                    raise ExpressionError(f"{source!r}: unknown name {node.id!r} (n = {n})")
        self._code = compile(tree, "<expr>", "eval")

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        env = dict(FUNCTIONS)
        env.update(CONSTANTS)
        for k in range(self.n):
            env[f"x{k + 1}"] = X[:, k]
        env["r"] = np.linalg.norm(X, axis=1)
        with np.errstate(all="ignore"):
            out = eval(self._code, {"__builtins__": {}}, env)  # noqa: S307 - whitelisted tree
        return np.broadcast_to(np.asarray(out, dtype=float), (X.shape[0],)).copy()

    def __repr__(self) -> str:
        return f"Expression({self.source!r})"


def compile_expression(source, n: int):
    """Scalar, vector (list) or matrix (list of lists) expression to a callable.

    The callable maps ``(m, n)`` points to ``(m,)``, ``(m, k)`` or ``(m, k, l)``.
    """
    if isinstance(source, str):
        return Expression(source, n), ()
    if isinstance(source, (list, tuple)) and source and all(isinstance(s, str) for s in source):
        parts = [Expression(s, n) for s in source]
        return (lambda X: np.stack([p(X) for p in parts], axis=1)), (len(parts),)
    if isinstance(source, (list, tuple)) and source and all(isinstance(s, (list, tuple)) for s in source):
        rows = [[Expression(s, n) for s in row] for row in source]
        shape = (len(rows), len(rows[0]))
        if any(len(row) != shape[1] for row in rows):
            raise ExpressionError("matrix expression rows differ in length")
        return (lambda X: np.stack([np.stack([p(X) for p in row], axis=1) for row in rows], axis=1)), shape
    raise ExpressionError(f"unsupported expression {source!r}")
