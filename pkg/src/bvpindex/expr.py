"""Restricted expression grammar for symbol entries.

Entries are written in Python syntax over the variables ``x`` (boundary
coordinate), ``t`` (collar coordinate), ``xi`` (tangential covariable),
``lam`` (normal covariable) and ``absxi`` (|xi|).  Allowed: numeric
constants, ``i``/``I``/``j`` for the imaginary unit, ``pi``, ``+ - * /``,
integer powers, and the functions listed in ``FUNCTIONS``.
"""
from __future__ import annotations

import ast

import numpy as np

from .errors import MalformedSymbolError

VARIABLES = ("x", "t", "xi", "lam", "absxi")
CONSTANTS = {"i": 1j, "I": 1j, "j": 1j, "pi": np.pi}


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def cutoff(t):
    """Equal to 1 for t <= 1/3 and 0 for t >= 2/3."""
    return 1.0 - smooth_step(3.0 * np.asarray(t, dtype=float) - 1.0)


FUNCTIONS = {
    "exp": np.exp,
    "cos": np.cos,
    "sin": np.sin,
    "sqrt": lambda z: np.sqrt(np.asarray(z, dtype=complex)),
    "abs": np.abs,
    "conj": np.conj,
    "heaviside": lambda z: np.where(np.real(z) >= 0, 1.0, 0.0),
    "sgn": lambda z: np.where(np.real(z) >= 0, 1.0, -1.0),
    "cutoff": lambda z: cutoff(np.real(z)),
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
}


class Expression:
    """A compiled scalar expression; call with a mapping of variable arrays."""

    def __init__(self, source: str):
        if not isinstance(source, str):
            source = repr(source)
        self.source = source
        try:
            tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as exc:
            raise MalformedSymbolError(f"cannot parse {source!r}: {exc.msg}") from None
        self._fn = self._compile(tree.body)
        self.names = frozenset(
            n.id for n in ast.walk(tree) if isinstance(n, ast.Name) and n.id in VARIABLES
        )

    def __call__(self, env):
        return self._fn(env)

    def __repr__(self):
        return f"Expression({self.source!r})"

    def _compile(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float, complex)):
                raise MalformedSymbolError(f"bad constant in {self.source!r}")
            value = complex(node.value)
            return lambda env: value
        if isinstance(node, ast.Name):
            name = node.id
            if name in VARIABLES:
                return lambda env: env[name]
            if name in CONSTANTS:
                value = CONSTANTS[name]
                return lambda env: value
            raise MalformedSymbolError(f"unknown name {name!r} in {self.source!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = self._compile(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda env: -inner(env)
            return inner
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                exponent = node.right
                if isinstance(exponent, ast.UnaryOp) and isinstance(exponent.op, ast.USub):
                    raise MalformedSymbolError(f"negative power in {self.source!r}")
                if not (isinstance(exponent, ast.Constant) and isinstance(exponent.value, int)):
                    raise MalformedSymbolError(f"non-integer power in {self.source!r}")
                base = self._compile(node.left)
                k = exponent.value
                return lambda env: base(env) ** k
            op = _BINOPS.get(type(node.op))
            if op is None:
                raise MalformedSymbolError(f"operator not allowed in {self.source!r}")
            left, right = self._compile(node.left), self._compile(node.right)
            return lambda env: op(left(env), right(env))
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise MalformedSymbolError(f"function not allowed in {self.source!r}")
            if len(node.args) != 1 or node.keywords:
                raise MalformedSymbolError(f"functions take one argument: {self.source!r}")
            fn = FUNCTIONS[node.func.id]
            arg = self._compile(node.args[0])
            return lambda env: fn(arg(env))
        raise MalformedSymbolError(f"construct {type(node).__name__} not allowed in {self.source!r}")
