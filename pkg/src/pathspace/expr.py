"""Scalar expressions for metric entries and transition maps.

Grammar (precedence high to low)::

    atom    := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'
    power   := atom ('^' unary)?          # right associative
    unary   := '-' unary | power
    term    := unary (('*' | '/') unary)*
    expr    := term (('+' | '-') term)*

Variables are ``x1`` .. ``xn``. Trees are immutable and can be evaluated,
differentiated symbolically, serialized back to text, or compiled to a
Python callable for use inside integrator loops.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import ArityError, DomainError, ParseError, UnknownIdentifier

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "cosh", "sinh", "tanh")

_FUNC_IMPL = {name: getattr(math, name) for name in FUNCTIONS}


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    def __call__(self, *point: float) -> float:
        return eval_expr(self, point)

    def __str__(self) -> str:
        return serialize(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based, as written in the source


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


ZERO = Num(0.0)
ONE = Num(1.0)


# ---------------------------------------------------------------------------
# tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)
_VAR_RE = re.compile(r"x([1-9]\d*)\Z")


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok, cls=ParseError):
        return cls(message, _byte_offset(self.source, tok[2]))

    def expect(self, text):
        tok = self.advance()
        if tok[1] != text or tok[0] == "num":
            found = tok[1] or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}", tok)
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected token {tok[1]!r}", tok)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.advance()
        kind, text, _ = tok
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            m = _VAR_RE.match(text)
            if m:
                return Var(int(m.group(1)))
            if text not in FUNCTIONS:
                raise self.error(f"unknown identifier {text!r}", tok, UnknownIdentifier)
            open_tok = self.peek()
            if open_tok[1] != "(":
                raise self.error(f"function {text!r} needs an argument list", open_tok, ArityError)
            self.advance()
            if self.peek()[1] == ")":
                raise self.error(f"{text} takes exactly 1 argument, got 0", self.peek(), ArityError)
            arg = self.expr()
            nargs = 1
            while self.peek()[1] == ",":
                self.advance()
                self.expr()
                nargs += 1
            if nargs != 1:
                raise self.error(f"{text} takes exactly 1 argument, got {nargs}", tok, ArityError)
            self.expect(")")
            return Call(text, arg)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = text or "end of input"
        raise self.error(f"unexpected token {found!r}", tok)


def parse_expr(source: str) -> Expr:
    """Parse ``source`` into an expression tree.

    Raises :class:`ParseError` (with a byte offset) on malformed input,
    :class:`UnknownIdentifier` for names outside the grammar and
    :class:`ArityError` for function calls with the wrong argument count.
    """
    if not isinstance(source, str) or not source.strip():
        raise ParseError("empty expression", 0)
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def max_var(e: Expr) -> int:
    """Highest variable index appearing in ``e`` (0 for constants)."""
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Num):
        return 0
    if isinstance(e, (Neg, Call)):
        return max_var(e.arg)
    return max(max_var(e.left), max_var(e.right))


def _pow(a: float, b: float) -> float:
    return math.pow(a, b)


def _div(a: float, b: float) -> float:
    return a / b


def eval_expr(e: Expr, point: Sequence[float]) -> float:
    """Evaluate ``e`` at ``point`` (``point[0]`` is ``x1``)."""
    need = max_var(e)
    if len(point) < need:
        raise ValueError(f"expression uses x{need} but point has dimension {len(point)}")
    try:
        value = _eval(e, point)
    except (ZeroDivisionError, ValueError, OverflowError) as exc:
        raise DomainError(f"cannot evaluate {serialize(e)} at {tuple(point)}: {exc}") from None
    if not math.isfinite(value):
        raise DomainError(f"non-finite value of {serialize(e)} at {tuple(point)}")
    return value


def _eval(e: Expr, p) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(p[e.index - 1])
    if isinstance(e, Neg):
        return -_eval(e.arg, p)
    if isinstance(e, Call):
        return _FUNC_IMPL[e.func](_eval(e.arg, p))
    a = _eval(e.left, p)
    b = _eval(e.right, p)
    op = e.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return _div(a, b)
    return _pow(a, b)


def _pysrc(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x[{e.index - 1}]"
    if isinstance(e, Neg):
        return f"(-{_pysrc(e.arg)})"
    if isinstance(e, Call):
        return f"{e.func}({_pysrc(e.arg)})"
    a, b = _pysrc(e.left), _pysrc(e.right)
    if e.op == "^":
        return f"_pow({a}, {b})"
    if e.op == "/":
        return f"({a} / {b})"
    return f"({a} {e.op} {b})"


def compile_exprs(exprs: Sequence[Expr]) -> Callable[[Sequence[float]], list]:
    """Compile several trees into one callable ``f(x) -> [values]``.

    Performs the same floating-point operations as :func:`eval_expr`, so
    results agree bit for bit. Domain errors surface as :class:`DomainError`.
    """
    body = ", ".join(_pysrc(e) for e in exprs)
    src = f"def _f(x):\n    return [{body}]\n"
    namespace = dict(_FUNC_IMPL, _pow=_pow, __builtins__={})
    exec(compile(src, "<metric-expr>", "exec"), namespace)
    raw = namespace["_f"]

    def f(x):
        try:
            return raw(x)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise DomainError(f"expression evaluation failed at {tuple(x)}: {exc}") from None

    return f


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def serialize(e: Expr) -> str:
    """Fully parenthesized text form; ``parse_expr(serialize(e))`` rebuilds ``e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Neg):
        return f"(-{serialize(e.arg)})"
    if isinstance(e, Call):
        return f"{e.func}({serialize(e.arg)})"
    return f"({serialize(e.left)}{e.op}{serialize(e.right)})"


# ---------------------------------------------------------------------------
# symbolic differentiation
# ---------------------------------------------------------------------------

def _is_num(e, value=None):
    return isinstance(e, Num) and (value is None or e.value == value)


# Smart constructors only drop exact zeros and ones; no other rewriting.
def _add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return BinOp("+", a, b)


def _sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    return BinOp("*", a, b)


def _div_node(a, b):
    if _is_num(a, 0.0):
        return ZERO
    if _is_num(b, 1.0):
        return a
    return BinOp("/", a, b)


def _neg(a):
    if _is_num(a, 0.0):
        return ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def depends_on(e: Expr, var: int) -> bool:
    if isinstance(e, Var):
        return e.index == var
    if isinstance(e, Num):
        return False
    if isinstance(e, (Neg, Call)):
        return depends_on(e.arg, var)
    return depends_on(e.left, var) or depends_on(e.right, var)


def diff_expr(e: Expr, var: int) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to ``x<var>``."""
    if var < 1:
        raise ValueError("variables are numbered from 1")
    return _diff(e, var)


def _diff(e: Expr, k: int) -> Expr:
    if not depends_on(e, k):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Neg):
        return _neg(_diff(e.arg, k))
    if isinstance(e, Call):
        a = e.arg
        da = _diff(a, k)
        f = e.func
        if f == "sin":
            outer = Call("cos", a)
        elif f == "cos":
            outer = _neg(Call("sin", a))
        elif f == "exp":
            outer = e
        elif f == "log":
            return _div_node(da, a)
        elif f == "sqrt":
            return _div_node(da, _mul(Num(2.0), e))
        elif f == "cosh":
            outer = Call("sinh", a)
        elif f == "sinh":
            outer = Call("cosh", a)
        else:  # tanh
            outer = _sub(ONE, BinOp("^", e, Num(2.0)))
        return _mul(outer, da)

    a, b, op = e.left, e.right, e.op
    if op in "+-":
        da, db = _diff(a, k), _diff(b, k)
        return _add(da, db) if op == "+" else _sub(da, db)
    if op == "*":
        return _add(_mul(_diff(a, k), b), _mul(a, _diff(b, k)))
    if op == "/":
        num = _sub(_mul(_diff(a, k), b), _mul(a, _diff(b, k)))
        return _div_node(num, BinOp("^", b, Num(2.0)))
    # power
    if not depends_on(b, k):
        if isinstance(b, Num):
            lowered = BinOp("^", a, Num(b.value - 1.0))
        else:
            lowered = BinOp("^", a, _sub(b, ONE))
        return _mul(_mul(b, lowered), _diff(a, k))
    if not depends_on(a, k):
        return _mul(_mul(e, Call("log", a)), _diff(b, k))
    inner = _add(_mul(_diff(b, k), Call("log", a)), _div_node(_mul(b, _diff(a, k)), a))
    return _mul(e, inner)
