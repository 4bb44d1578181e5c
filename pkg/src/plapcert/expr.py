"""A small expression language for problem data.

Grammar, loosest binding first::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := primary ("^" unary)?          # right associative
    primary := NUMBER | VAR | FUNC "(" expr ("," expr)* ")"
             | "piecewise" "(" clause ("," clause)* ")" | "(" expr ")"
    clause  := "(" (cond | "else") "," expr ")"
    cond    := VAR ("<=" | "<" | ">=" | ">") ["-"] NUMBER

Variables are ``t``, ``u``, ``v`` and ``w``. Evaluation is vectorised: any
binding may be a numpy array and the result broadcasts accordingly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

VARIABLES = ("t", "u", "v", "w")
FUNCTIONS = {"sqrt": 1, "abs": 1, "sgn": 1, "exp": 1, "log": 1, "min": -2, "max": -2}


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.text = text


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ExprEvalError(ExprError, ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: Expr


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Cond:
    var: str
    op: str
    value: float


@dataclass(frozen=True)
class Piecewise:
    # ``None`` as condition marks the ``else`` clause.
    clauses: tuple


Expr = Union[Num, Var, Neg, BinOp, Call, Piecewise]


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|≤|≥|[-+*/^(),<>−])
    """,
    re.VERBOSE,
)
_NORMALIZE = {"−": "-", "≤": "<=", "≥": ">="}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos), text)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            tokens.append((kind, _NORMALIZE.get(value, value), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None, cls=ExprSyntaxError):
        tok = tok or self.peek()
        return cls(message, _byte_offset(self.text, tok[2]), self.text)

    def expect(self, value):
        tok = self.advance()
        if tok[1] != value or tok[0] not in ("op",):
            raise self.error(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        tok = self.advance()
        kind, value, _ = tok
        if kind == "num":
            return Num(float(value))
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if value in VARIABLES:
                return Var(value)
            if value == "piecewise":
                return self.piecewise()
            if value in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[value]
                if (arity > 0 and len(args) != arity) or (arity < 0 and len(args) < -arity):
                    raise self.error(f"wrong number of arguments to {value}()", tok)
                return Call(value, tuple(args))
            raise self.error(f"unknown identifier {value!r}", tok, UnknownIdentifierError)
        raise self.error(f"unexpected token {value or 'end of input'!r}", tok)

    def piecewise(self):
        self.expect("(")
        clauses = []
        while True:
            self.expect("(")
            tok = self.peek()
            if tok[0] == "name" and tok[1] == "else":
                self.advance()
                cond = None
            else:
                cond = self.condition()
            self.expect(",")
            clauses.append((cond, self.expr()))
            self.expect(")")
            if cond is None:
                break
            if self.peek()[1] != ",":
                break
            self.advance()
        self.expect(")")
        return Piecewise(tuple(clauses))

    def condition(self):
        tok = self.advance()
        if tok[0] != "name":
            raise self.error("piecewise condition must start with a variable", tok)
        if tok[1] not in VARIABLES:
            raise self.error(f"unknown identifier {tok[1]!r}", tok, UnknownIdentifierError)
        op = self.advance()
        if op[1] not in ("<=", "<", ">=", ">"):
            raise self.error("expected a comparison operator", op)
        sign = 1.0
        if self.peek()[1] == "-":
            self.advance()
            sign = -1.0
        lit = self.advance()
        if lit[0] != "num":
            raise self.error("piecewise threshold must be a numeric literal", lit)
        return Cond(tok[1], op[1], sign * float(lit[1]))


@lru_cache(maxsize=512)
def parse_expression(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises:
        ExprSyntaxError: Malformed input; ``offset`` is a byte offset.
        UnknownIdentifierError: An identifier outside the language.
    """
    return _Parser(text).parse()


def free_variables(e: Expr) -> frozenset:
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Var):
        return frozenset({e.name})
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Call):
        return frozenset().union(*(free_variables(a) for a in e.args))
    out = set()
    for cond, body in e.clauses:
        if cond is not None:
            out.add(cond.var)
        out |= free_variables(body)
    return frozenset(out)


def constant_value(e: Expr) -> float | None:
    """The value of a variable-free expression, or ``None``."""
    if free_variables(e):
        return None
    return float(evaluate(e, {}))


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt_num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def to_source(e: Expr) -> str:
    """Render ``e`` back into parseable text."""

    def render(node, parent_prec=0, right_of_pow=False):
        if isinstance(node, Num):
            s = _fmt_num(node.value)
            return f"({s})" if node.value < 0 else s
        if isinstance(node, Var):
            return node.name
        if isinstance(node, Neg):
            s = "-" + render(node.operand, _PREC["neg"])
            return s if parent_prec < _PREC["neg"] or right_of_pow else f"({s})"
        if isinstance(node, BinOp):
            prec = _PREC[node.op]
            if node.op == "^":
                s = f"{render(node.left, prec + 1)}^{render(node.right, prec, right_of_pow=True)}"
            else:
                s = f"{render(node.left, prec)} {node.op} {render(node.right, prec + 1)}"
            return f"({s})" if prec < parent_prec else s
        if isinstance(node, Call):
            return f"{node.name}({', '.join(render(a) for a in node.args)})"
        parts = []
        for cond, body in node.clauses:
            head = "else" if cond is None else f"{cond.var} {cond.op} {_fmt_num(cond.value)}"
            parts.append(f"({head}, {render(body)})")
        return f"piecewise({', '.join(parts)})"

    return render(e)


def _fail(message: str, mask=None) -> ExprEvalError:
    if mask is not None and np.ndim(mask) > 0:
        message += f" (first at flat index {int(np.flatnonzero(mask)[0])})"
    return ExprEvalError(message)


def _eval(node, env: dict, size: int | None):
    if isinstance(node, Num):
        return node.value if size is None else np.full(size, node.value)
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ExprEvalError(f"unbound variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env, size)
    if isinstance(node, BinOp):
        a = _eval(node.left, env, size)
        b = _eval(node.right, env, size)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            zero = np.equal(b, 0.0)
            if np.any(zero):
                raise _fail("division by zero", zero)
            return a / b
        with np.errstate(all="ignore"):
            if size is None:
                if a == 0.0 and b < 0.0:
                    raise ExprEvalError("division by zero (0 raised to a negative power)")
                if a < 0.0 and b != int(b):
                    raise ExprEvalError("negative base raised to a non-integer power")
                try:
                    return float(a) ** float(b)
                except OverflowError:
                    return math.inf
            a = np.asarray(a, dtype=float)
            b = np.asarray(b, dtype=float)
            bad = (a == 0.0) & (b < 0.0)
            if np.any(bad):
                raise _fail("division by zero (0 raised to a negative power)", bad)
            bad = (a < 0.0) & (b != np.round(b))
            if np.any(bad):
                raise _fail("negative base raised to a non-integer power", bad)
            return np.power(a, b)
    if isinstance(node, Call):
        args = [_eval(a, env, size) for a in node.args]
        name = node.name
        if name == "sqrt":
            x = args[0]
            neg = np.less(x, 0.0)
            if np.any(neg):
                raise _fail("sqrt of a negative number", neg)
            return math.sqrt(x) if size is None else np.sqrt(x)
        if name == "log":
            x = args[0]
            bad = np.less_equal(x, 0.0)
            if np.any(bad):
                raise _fail("log of a nonpositive number", bad)
            return math.log(x) if size is None else np.log(x)
        if name == "exp":
            if size is None:
                try:
                    return math.exp(args[0])
                except OverflowError:
                    return math.inf
            with np.errstate(over="ignore"):
                return np.exp(args[0])
        if name == "abs":
            return abs(args[0]) if size is None else np.abs(args[0])
        if name == "sgn":
            return float(np.sign(args[0])) if size is None else np.sign(args[0])
        if name == "min":
            return min(args) if size is None else np.minimum.reduce(args)
        return max(args) if size is None else np.maximum.reduce(args)
    # Piecewise: each branch only sees the points it selects, so a branch
    # undefined outside its own region cannot raise spuriously.
    if size is None:
        for cond, body in node.clauses:
            if cond is None or _cond_holds(cond, env):
                return _eval(body, env, None)
        raise ExprEvalError("no piecewise clause matched")
    out = np.empty(size)
    remaining = np.ones(size, dtype=bool)
    for cond, body in node.clauses:
        sel = remaining.copy() if cond is None else remaining & _cond_holds(cond, env)
        if np.any(sel):
            sub_env = {k: val[sel] for k, val in env.items()}
            out[sel] = _eval(body, sub_env, int(sel.sum()))
        remaining &= ~sel
        if not remaining.any():
            break
    if remaining.any():
        raise _fail("no piecewise clause matched", remaining)
    return out


def _cond_holds(cond: Cond, env: dict):
    try:
        x = env[cond.var]
    except KeyError:
        raise ExprEvalError(f"unbound variable {cond.var!r}") from None
    if cond.op == "<=":
        return x <= cond.value
    if cond.op == "<":
        return x < cond.value
    if cond.op == ">=":
        return x >= cond.value
    return x > cond.value


def evaluate(e: Expr, bindings: dict):
    """Evaluate ``e`` under ``bindings`` (variable name -> float or array).

    Scalar bindings give a float; array bindings broadcast together and give
    an array of the broadcast shape.

    Raises:
        ExprEvalError: Unbound variable, division by zero, or a domain error
            (sqrt or log out of domain, fractional power of a negative).
    """
    arrays = {k: v for k, v in bindings.items() if np.ndim(v) > 0}
    if not arrays:
        env = {k: float(v) for k, v in bindings.items()}
        value = _eval(e, env, None)
        return float(value)
    keys = list(bindings)
    broadcast = np.broadcast_arrays(*(np.asarray(bindings[k], dtype=float) for k in keys))
    shape = broadcast[0].shape
    env = {k: b.ravel() for k, b in zip(keys, broadcast)}
    size = int(np.prod(shape))
    value = _eval(e, env, size)
    return np.broadcast_to(np.asarray(value, dtype=float), (size,)).reshape(shape)
