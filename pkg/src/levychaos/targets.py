"""Target functionals of a path batch, written as small arithmetic expressions.

Names (optionally called with a time, e.g. ``W(0.5)``; bare names mean the
horizon):

``W``      Gaussian part
``N``      number of jumps
``S``      sum of jump sizes
``Lbar``   compensated process ``W + S - t nu(x)``
``X<k>``   family martingale ``X^{e_k}``
``T``      the horizon (a constant)

Operators: ``+ - * / **``, unary minus, ``abs``, ``exp``, ``sqrt``.
"""
from __future__ import annotations

import ast
import operator
import re
from typing import Sequence

import numpy as np

from .errors import ConfigInvalid
from .measure import nu_integral
from .montecarlo import PathBatch

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"abs": np.abs, "exp": np.exp, "sqrt": np.sqrt}
_PROCESS = re.compile(r"^(W|N|S|Lbar|X\d+)$")


def parse_target(expr: str) -> ast.Expression:
    """Parse and validate; raises :class:`ConfigInvalid` on anything else."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigInvalid([("target", f"syntax error: {exc.msg}")]) from None
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.BinOp, ast.UnaryOp, ast.USub, ast.UAdd,
                             ast.Load, ast.Call)) or type(node) in _BINOPS:
            continue
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            continue
        if isinstance(node, ast.Name) and (node.id in _FUNCS or node.id == "T" or _PROCESS.match(node.id)):
            continue
        raise ConfigInvalid([("target", f"unsupported element {type(node).__name__} in {expr!r}")])
    return tree


class _Evaluator:
    def __init__(self, batch: PathBatch, family, nu):
        self.batch, self.family, self.nu = batch, family, nu
        self.T = batch.horizon

    def process(self, name: str, t: float) -> np.ndarray:
        b = self.batch
        if not 0.0 <= t <= self.T:
            raise ConfigInvalid([("target", f"time {t} outside [0, {self.T}]")])
        if name == "W":
            return b.brownian_at(t)
        if name == "N":
            return b.jump_sum_at(np.ones_like, t)
        if name == "S":
            return b.jump_sum_at(lambda x: x, t)
        if name == "Lbar":
            drift = self.nu.integrate(lambda x: x)
            return b.brownian_at(t) + b.jump_sum_at(lambda x: x, t) - t * drift
        k = int(name[1:])
        if k >= len(self.family):
            raise ConfigInvalid([("target", f"{name} exceeds the family size {len(self.family)}")])
        f = self.family[k]
        return (f.at_zero * b.brownian_at(t) + b.jump_sum_at(f.jump, t)
                - t * nu_integral(f, self.nu))

    def eval(self, node):
        if isinstance(node, ast.Expression):
            return self.eval(node.body)
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self.eval(node.left), self.eval(node.right))
        if isinstance(node, ast.UnaryOp):
            v = self.eval(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Name):
            if node.id == "T":
                return self.T
            return self.process(node.id, self.T)
        if isinstance(node, ast.Call):
            name = node.func.id
            args = [self.eval(a) for a in node.args]
            if name in _FUNCS:
                return _FUNCS[name](*args)
            if len(args) != 1 or not np.isscalar(args[0]):
                raise ConfigInvalid([("target", f"{name}(t) takes one constant time")])
            return self.process(name, float(args[0]))
        raise ConfigInvalid([("target", "unsupported expression")])  # pragma: no cover


def evaluate_target(expr: str, batch: PathBatch, family: Sequence, nu) -> np.ndarray:
    """Target values for every path of ``batch``."""
    val = _Evaluator(batch, family, nu).eval(parse_target(expr))
    return np.broadcast_to(np.asarray(val, dtype=float), (batch.n_paths,)).copy()
