"""A tiny arithmetic expression language for custom metric components.

Grammar: numbers, coordinate names, ``pi``, binary ``+ - * / ^``, unary
minus, parentheses and the functions ``sin cos exp log sqrt``. Expressions
are parsed with :mod:`ast` after mapping ``^`` to ``**``; any other node
type is rejected.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ConfigError

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
CONSTANTS = {"pi": np.pi}

_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


def _check(node: ast.AST, names: set[str]) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, names)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _BINOPS):
            raise ConfigError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left, names)
        _check(node.right, names)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ConfigError(f"operator {type(node.op).__name__} not allowed")
        _check(node.operand, names)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ConfigError("only sin, cos, exp, log, sqrt may be called")
        if len(node.args) != 1 or node.keywords:
            raise ConfigError(f"{node.func.id} takes exactly one argument")
        _check(node.args[0], names)
    elif isinstance(node, ast.Name):
        if node.id not in names and node.id not in CONSTANTS:
            raise ConfigError(f"unknown symbol {node.id!r}")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ConfigError(f"bad literal {node.value!r}")
    else:
        raise ConfigError(f"syntax {type(node).__name__} not allowed")


class Expression:
    """Compiled expression in the given variables, callable on floats."""

    def __init__(self, source: str, variables: tuple[str, ...]):
        self.source = source
        self.variables = tuple(variables)
        text = str(source).replace("^", "**")
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse {source!r}: {exc.msg}") from None
        _check(tree, set(self.variables))
        self._code = compile(tree, "<metric-component>", "eval")

    def __call__(self, *values: float) -> float:
        env = dict(FUNCTIONS)
        env.update(CONSTANTS)
        env.update(zip(self.variables, values))
        return float(eval(self._code, {"__builtins__": {}}, env))

    def __repr__(self) -> str:
        return f"Expression({self.source!r})"
