"""Scalar expression language for vector fields and Lyapunov functions.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

Variables are ``x1..xn`` (state), ``u1..um`` (input) and ``y1..yn`` (second
state copy, used by incremental Lyapunov functions).  Evaluation works on
floats or on numpy arrays of matching shape, so one parsed field can be
integrated over a whole batch of initial states at once.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    BindError,
    ExprDomainError,
    ExprSyntaxError,
    UnknownFunctionError,
    UnknownVariableError,
)

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}

# binding strength used by the printer
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)
_VAR = re.compile(r"([xuy])([1-9][0-9]*)")


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # 'x', 'u' or 'y'
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Num | Var | Neg | BinOp | Call


# --- parsing ---------------------------------------------------------------


class _Token:
    __slots__ = ("kind", "text", "offset")

    def __init__(self, kind, text, offset):
        self.kind = kind
        self.text = text
        self.offset = offset


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    byte = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", byte)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), byte))
        byte += len(m.group().encode("utf-8"))
        pos = m.end()
    tokens.append(_Token("end", "", byte))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def _advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def _expect(self, text):
        t = self.tok
        if t.kind != "op" or t.text != text:
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", t.offset)
        return self._advance()

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected token {self.tok.text!r}", self.tok.offset)
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self._advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self._advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self._advance()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self._advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self._advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        t = self.tok
        if t.kind == "num":
            self._advance()
            return Num(float(t.text))
        if t.kind == "name":
            self._advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                if t.text not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {t.text!r}", t.offset)
                self._advance()
                arg = self.expr()
                self._expect(")")
                return Call(t.text, arg)
            m = _VAR.fullmatch(t.text)
            if m is None:
                raise UnknownVariableError(f"unknown variable {t.text!r}", t.offset)
            return Var(m.group(1), int(m.group(2)))
        if t.kind == "op" and t.text == "(":
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"unexpected {found}", t.offset)


def parse(text: str) -> Expression:
    """Parse ``text`` into an expression tree."""
    return _Parser(text).parse()


# --- printing --------------------------------------------------------------


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def to_string(node: Expression) -> str:
    """Canonical text form; ``parse(to_string(e)) == e`` for parsed trees."""
    if isinstance(node, Num):
        v = node.value
        if not np.isfinite(v):
            raise ValueError("cannot print a non-finite literal")
        s = repr(float(v))
        return s if v >= 0 else f"({s})"
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    if isinstance(node, Neg):
        inner = to_string(node.operand)
        if _prec(node.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    op = node.op
    p = _PREC[op]
    left = to_string(node.left)
    right = to_string(node.right)
    if op == "^":
        # base must be a primary; exponent may be any unary-level node
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {op} {right}"


# --- inspection ------------------------------------------------------------


def variables(node: Expression) -> set[tuple[str, int]]:
    """All ``(kind, index)`` pairs referenced by ``node``."""
    if isinstance(node, Var):
        return {(node.kind, node.index)}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return variables(node.operand if isinstance(node, Neg) else node.arg)
    return variables(node.left) | variables(node.right)


def bind(node: Expression, n: int, m: int) -> Expression:
    """Check that every variable index fits state dimension n / input dimension m."""
    limits = {"x": n, "y": n, "u": m}
    for kind, idx in sorted(variables(node)):
        if idx > limits[kind]:
            raise BindError(f"variable {kind}{idx} out of range (n={n}, m={m})")
    return node


def uses_y(node: Expression) -> bool:
    return any(kind == "y" for kind, _ in variables(node))


# --- evaluation ------------------------------------------------------------


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.kind][..., node.index - 1]
    if isinstance(node, BinOp):
        return _BINARY[node.op](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, Neg):
        return np.negative(_eval(node.operand, env))
    return FUNCTIONS[node.func](_eval(node.arg, env))


def _locate(node, env):
    """Return the innermost sub-expression producing a non-finite value."""
    children = ()
    if isinstance(node, BinOp):
        children = (node.left, node.right)
    elif isinstance(node, Neg):
        children = (node.operand,)
    elif isinstance(node, Call):
        children = (node.arg,)
    for child in children:
        hit = _locate(child, env)
        if hit is not None:
            return hit
    if not np.all(np.isfinite(_eval(node, env))):
        return node
    return None


def _env(x, u, y):
    env = {"x": np.asarray(x, dtype=float), "u": np.asarray(u, dtype=float)}
    if y is not None:
        env["y"] = np.asarray(y, dtype=float)
    return env


def evaluate_raw(node: Expression, env: dict):
    """Evaluate without finiteness checks; ``env`` maps 'x'/'u'/'y' to arrays."""
    with np.errstate(all="ignore"):
        return _eval(node, env)


def evaluate(node: Expression, x, u=(), y=None):
    """Evaluate ``node`` at state ``x``, input ``u`` and optional second state ``y``.

    Inputs may carry leading batch dimensions (last axis indexes the
    variable). Scalars come back as Python floats.
    """
    if y is None and uses_y(node):
        raise ValueError("expression references y-variables but no y was supplied")
    env = _env(x, u, y)
    with np.errstate(all="ignore"):
        value = _eval(node, env)
        if not np.all(np.isfinite(value)):
            bad = _locate(node, env) or node
            raise ExprDomainError(to_string(bad))
    if np.ndim(value) == 0:
        return float(value)
    return value
