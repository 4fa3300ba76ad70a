"""Small arithmetic expression language over the variables t, q, p.

Grammar (lowest to highest binding):

    sum     := product (('+' | '-') product)*
    product := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := primary ('^' factor)?          # right-associative
    primary := NUMBER | 'pi' | VARIABLE | FUNC '(' sum ')' | '(' sum ')'

Functions: sin, cos, tan, exp, log, sqrt, abs. Numeric literals are decimal
(optionally with a fractional part and an exponent); ``pi`` is the only named
constant. ``+``, ``-``, ``*``, ``/`` associate left; ``^`` binds tighter than
unary minus, so ``-t^2`` is ``-(t^2)``.

Parsing produces an immutable tree. Plain evaluation runs a closure compiled
once from the validated tree (bit-identical results call to call); when it
trips a domain error or a non-finite intermediate, the tree is re-walked to
name the offending subexpression. Second-order jet evaluation propagates
(value, d/dt, d2/dt2) through the tree for barrier derivatives.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .errors import (
    DisallowedVariableError,
    ExprEvalError,
    ExprSyntaxError,
    NondifferentiableError,
    UnknownIdentifierError,
)

__all__ = ["Expression", "Jet2", "parse", "VARIABLES", "FUNCTIONS"]

VARIABLES = ("t", "q", "p")
FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")

_MATH_FN = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
}


# --- syntax tree -----------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]

_PREC_ADD = 10
_PREC_MUL = 20
_PREC_NEG = 25
_PREC_POW = 30
_PREC_ATOM = 100

_BINOP_PREC = {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL, "^": _PREC_POW}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _BINOP_PREC[node.op]
    if isinstance(node, Neg):
        return _PREC_NEG
    return _PREC_ATOM


def _to_text(node: Node) -> str:
    """Canonical text with the fewest parentheses that re-parse to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({_to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = _to_text(node.arg)
        if _prec(node.arg) < _PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    assert isinstance(node, BinOp)
    my = _BINOP_PREC[node.op]
    lt = _to_text(node.left)
    rt = _to_text(node.right)
    if node.op == "^":
        # right-associative: parenthesize an equal-precedence left child
        if _prec(node.left) <= my:
            lt = f"({lt})"
        if _prec(node.right) < my:
            rt = f"({rt})"
    else:
        if _prec(node.left) < my:
            lt = f"({lt})"
        if _prec(node.right) <= my:
            rt = f"({rt})"
    return f"{lt} {node.op} {rt}" if node.op in "+-" else f"{lt}{node.op}{rt}"


def _collect_vars(node: Node, out: set) -> None:
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Neg):
        _collect_vars(node.arg, out)
    elif isinstance(node, BinOp):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, Call):
        _collect_vars(node.arg, out)


def _contains_fn(node: Node, fn: str) -> bool:
    if isinstance(node, Call):
        return node.fn == fn or _contains_fn(node.arg, fn)
    if isinstance(node, Neg):
        return _contains_fn(node.arg, fn)
    if isinstance(node, BinOp):
        return _contains_fn(node.left, fn) or _contains_fn(node.right, fn)
    return False


# --- tokenizer / parser ----------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def _tokenize(text: str) -> Iterator[tuple]:
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_pos = pos + (len(text[pos:]) - len(stripped))
            raise ExprSyntaxError(
                f"unexpected character {stripped[0]!r}", _byte_offset(text, bad_pos)
            )
        if m.lastgroup == "num":
            yield ("num", m.group("num"), m.start("num"))
        elif m.lastgroup == "name":
            yield ("name", m.group("name"), m.start("name"))
        else:
            yield ("op", m.group("op"), m.start("op"))
        pos = m.end()
    yield ("end", "", n)


class _Parser:
    def __init__(self, text: str, allowed_vars: frozenset):
        self.text = text
        self.allowed = allowed_vars
        self.tokens = list(_tokenize(text))
        self.i = 0

    def peek(self) -> tuple:
        return self.tokens[self.i]

    def advance(self) -> tuple:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected '{op}'", _byte_offset(self.text, pos))
        self.advance()

    def parse(self) -> Node:
        node = self.sum()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(
                f"unexpected trailing input {val!r}", _byte_offset(self.text, pos)
            )
        return node

    def sum(self) -> Node:
        node = self.product()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = BinOp(val, node, self.product())
            else:
                return node

    def product(self) -> Node:
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                node = BinOp(val, node, self.factor())
            else:
                return node

    def factor(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def primary(self) -> Node:
        kind, val, pos = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val == "pi":
                return Num(math.pi)
            if val in FUNCTIONS:
                self.expect_op("(")
                arg = self.sum()
                self.expect_op(")")
                return Call(val, arg)
            if val in VARIABLES:
                if val not in self.allowed:
                    raise DisallowedVariableError(val, self.allowed, _byte_offset(self.text, pos))
                return Var(val)
            raise UnknownIdentifierError(val, _byte_offset(self.text, pos))
        if kind == "op" and val == "(":
            node = self.sum()
            self.expect_op(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", _byte_offset(self.text, pos))
        raise ExprSyntaxError(f"unexpected token {val!r}", _byte_offset(self.text, pos))


# --- compiled evaluation ---------------------------------------------------


def _codegen(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "_" + node.name
    if isinstance(node, Neg):
        return f"(-{_codegen(node.arg)})"
    if isinstance(node, Call):
        return f"_fn_{node.fn}({_codegen(node.arg)})"
    assert isinstance(node, BinOp)
    l, r = _codegen(node.left), _codegen(node.right)
    if node.op == "^":
        return f"_fn_pow({l}, {r})"
    return f"({l} {node.op} {r})"


def _compile(node: Node):
    env = {"_fn_" + name: fn for name, fn in _MATH_FN.items()}
    env["_fn_pow"] = math.pow
    src = f"def _compiled(_t, _q, _p):\n    return {_codegen(node)}\n"
    exec(src, env)  # env holds only math functions and the generated code
    return env["_compiled"]


def _eval_node(node: Node, t: Optional[float], q: Optional[float], p: Optional[float]) -> float:
    """Tree-walk evaluation used to attribute failures to a subexpression."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        val = {"t": t, "q": q, "p": p}[node.name]
        if val is None:
            raise ExprEvalError(f"variable '{node.name}' was not supplied")
        return val
    try:
        if isinstance(node, Neg):
            out = -_eval_node(node.arg, t, q, p)
        elif isinstance(node, Call):
            out = _MATH_FN[node.fn](_eval_node(node.arg, t, q, p))
        else:
            l = _eval_node(node.left, t, q, p)
            r = _eval_node(node.right, t, q, p)
            if node.op == "+":
                out = l + r
            elif node.op == "-":
                out = l - r
            elif node.op == "*":
                out = l * r
            elif node.op == "/":
                out = l / r
            else:
                out = math.pow(l, r)
    except ExprEvalError:
        raise
    except (ArithmeticError, ValueError) as exc:
        raise ExprEvalError(str(exc), _to_text(node)) from None
    if not math.isfinite(out):
        raise ExprEvalError("non-finite value", _to_text(node))
    return out


# --- second-order jets -----------------------------------------------------


@dataclass(frozen=True)
class Jet2:
    """Truncated second-order Taylor data (value, first, second derivative)."""

    value: float
    d1: float
    d2: float

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value + other.value, self.d1 + other.d1, self.d2 + other.d2)

    def __sub__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value - other.value, self.d1 - other.d1, self.d2 - other.d2)

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.d1, -self.d2)

    def __mul__(self, other: "Jet2") -> "Jet2":
        return Jet2(
            self.value * other.value,
            self.d1 * other.value + self.value * other.d1,
            self.d2 * other.value + 2.0 * self.d1 * other.d1 + self.value * other.d2,
        )

    def __truediv__(self, other: "Jet2") -> "Jet2":
        if other.value == 0.0:
            raise ExprEvalError("division by zero")
        v = self.value / other.value
        d1 = (self.d1 - v * other.d1) / other.value
        d2 = (self.d2 - 2.0 * d1 * other.d1 - v * other.d2) / other.value
        return Jet2(v, d1, d2)


def _jet_chain(fv: float, f1: float, f2: float, g: Jet2) -> Jet2:
    """Compose scalar f (with derivatives f1, f2 at g.value) after jet g."""
    return Jet2(fv, f1 * g.d1, f2 * g.d1 * g.d1 + f1 * g.d2)


def _jet_call(fn: str, g: Jet2, node: Node) -> Jet2:
    v = g.value
    if fn == "sin":
        s, c = math.sin(v), math.cos(v)
        return _jet_chain(s, c, -s, g)
    if fn == "cos":
        s, c = math.sin(v), math.cos(v)
        return _jet_chain(c, -s, -c, g)
    if fn == "tan":
        tv = math.tan(v)
        sec2 = 1.0 + tv * tv
        return _jet_chain(tv, sec2, 2.0 * sec2 * tv, g)
    if fn == "exp":
        try:
            e = math.exp(v)
        except OverflowError:
            raise ExprEvalError("overflow in exp", _to_text(node)) from None
        return _jet_chain(e, e, e, g)
    if fn == "log":
        if v <= 0.0:
            raise ExprEvalError("log of a non-positive value", _to_text(node))
        return _jet_chain(math.log(v), 1.0 / v, -1.0 / (v * v), g)
    if fn == "sqrt":
        if v < 0.0:
            raise ExprEvalError("sqrt of a negative value", _to_text(node))
        if v == 0.0:
            raise NondifferentiableError("sqrt is not differentiable at 0", _to_text(node))
        r = math.sqrt(v)
        return _jet_chain(r, 0.5 / r, -0.25 / (r * v), g)
    assert fn == "abs"
    if v == 0.0:
        raise NondifferentiableError("abs is not differentiable at 0", _to_text(node))
    sgn = 1.0 if v > 0.0 else -1.0
    return Jet2(abs(v), sgn * g.d1, sgn * g.d2)


def _jet_pow(a: Jet2, b: Jet2, node: Node) -> Jet2:
    if b.d1 == 0.0 and b.d2 == 0.0:
        c = b.value
        try:
            v = math.pow(a.value, c)
            f1 = c * math.pow(a.value, c - 1.0) if c != 0.0 else 0.0
            f2 = c * (c - 1.0) * math.pow(a.value, c - 2.0) if c not in (0.0, 1.0) else 0.0
        except (ValueError, OverflowError) as exc:
            raise ExprEvalError(str(exc), _to_text(node)) from None
        if not (math.isfinite(v) and math.isfinite(f1) and math.isfinite(f2)):
            raise ExprEvalError("non-finite value", _to_text(node))
        return _jet_chain(v, f1, f2, a)
    if a.value <= 0.0:
        raise ExprEvalError(
            "power with a varying exponent needs a positive base", _to_text(node)
        )
    return _jet_call("exp", b * _jet_call("log", a, node), node)


def _eval_jet(node: Node, active: str, seed: Jet2, fixed: dict) -> Jet2:
    if isinstance(node, Num):
        return Jet2(node.value, 0.0, 0.0)
    if isinstance(node, Var):
        if node.name == active:
            return seed
        val = fixed.get(node.name)
        if val is None:
            raise ExprEvalError(f"variable '{node.name}' was not supplied")
        return Jet2(val, 0.0, 0.0)
    if isinstance(node, Neg):
        return -_eval_jet(node.arg, active, seed, fixed)
    if isinstance(node, Call):
        return _jet_call(node.fn, _eval_jet(node.arg, active, seed, fixed), node)
    assert isinstance(node, BinOp)
    l = _eval_jet(node.left, active, seed, fixed)
    r = _eval_jet(node.right, active, seed, fixed)
    if node.op == "+":
        out = l + r
    elif node.op == "-":
        out = l - r
    elif node.op == "*":
        out = l * r
    elif node.op == "/":
        try:
            out = l / r
        except ExprEvalError as exc:
            raise ExprEvalError(str(exc), _to_text(node)) from None
    else:
        out = _jet_pow(l, r, node)
    if not (math.isfinite(out.value) and math.isfinite(out.d1) and math.isfinite(out.d2)):
        raise ExprEvalError("non-finite value", _to_text(node))
    return out


# --- public wrapper --------------------------------------------------------


class Expression:
    """A parsed, validated expression. Immutable; compare by structure."""

    __slots__ = ("root", "source", "variables", "_fn")

    def __init__(self, root: Node, source: str):
        self.root = root
        self.source = source
        used: set = set()
        _collect_vars(root, used)
        self.variables = frozenset(used)
        self._fn = _compile(root)

    def __eq__(self, other) -> bool:
        return isinstance(other, Expression) and self.root == other.root

    def __hash__(self) -> int:
        return hash(self.root)

    def __repr__(self) -> str:
        return f"Expression({self.to_text()!r})"

    def to_text(self) -> str:
        """Canonical rendering; parsing it back yields an equal tree."""
        return _to_text(self.root)

    def evaluate(self, t: float = None, q: float = None, p: float = None) -> float:
        """Evaluate at the given variable values.

        Raises ExprEvalError (naming the offending subexpression) on domain
        errors or non-finite intermediates.
        """
        for name in self.variables:
            if {"t": t, "q": q, "p": p}[name] is None:
                raise ExprEvalError(f"variable '{name}' was not supplied")
        try:
            out = self._fn(t, q, p)
        except (ArithmeticError, ValueError):
            return _eval_node(self.root, t, q, p)  # re-walk to name the node
        if not math.isfinite(out):
            return _eval_node(self.root, t, q, p)
        return out

    def eval_jet2(self, t: float) -> Jet2:
        """Value and first two t-derivatives. The expression must use only t."""
        extra = self.variables - {"t"}
        if extra:
            raise ExprEvalError(
                f"jet evaluation in t requires a t-only expression; found {sorted(extra)}"
            )
        return _eval_jet(self.root, "t", Jet2(t, 1.0, 0.0), {})

    def eval_jet2_in(self, active: str, value: float, **fixed: float) -> Jet2:
        """Value and first two derivatives with respect to one chosen variable."""
        if active not in VARIABLES:
            raise ExprEvalError(f"unknown variable '{active}'")
        extra = self.variables - {active} - set(fixed)
        if extra:
            raise ExprEvalError(f"variables {sorted(extra)} were not supplied")
        return _eval_jet(self.root, active, Jet2(value, 1.0, 0.0), fixed)

    def contains_abs(self) -> bool:
        return _contains_fn(self.root, "abs")


def parse(text: str, allowed_vars=VARIABLES) -> Expression:
    """Parse expression text, permitting only the given variables.

    Raises ExprSyntaxError with a byte offset on malformed input,
    UnknownIdentifierError for names outside the language, and
    DisallowedVariableError for known variables outside allowed_vars.
    """
    root = _Parser(text, frozenset(allowed_vars)).parse()
    return Expression(root, text)
