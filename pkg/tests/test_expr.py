import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathspace.errors import ArityError, DomainError, ParseError, UnknownIdentifier
from pathspace.expr import (
    BinOp,
    Neg,
    Num,
    Var,
    compile_exprs,
    diff_expr,
    eval_expr,
    parse_expr,
    serialize,
)


def test_literal():
    assert parse_expr("1") == Num(1.0)


def test_precedence_and_associativity():
    assert parse_expr("1+2*3") == BinOp("+", Num(1.0), BinOp("*", Num(2.0), Num(3.0)))
    assert parse_expr("8-3-2") == BinOp("-", BinOp("-", Num(8.0), Num(3.0)), Num(2.0))
    assert parse_expr("2^3^2") == BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))
    # ^ binds tighter than unary minus
    assert parse_expr("-x1^2") == Neg(BinOp("^", Var(1), Num(2.0)))
    assert eval_expr(parse_expr("-2^2"), ()) == -4.0
    assert eval_expr(parse_expr("2^-1"), ()) == 0.5
    assert eval_expr(parse_expr("2^3^2"), ()) == 512.0
    assert eval_expr(parse_expr("12/3/2"), ()) == 2.0


def test_sphere_conformal_factor():
    e = parse_expr("4/((1+x1^2+x2^2)^2)")
    assert eval_expr(e, (0.0, 0.0)) == 4.0
    assert eval_expr(parse_expr(serialize(e)), (0.0, 0.0)) == 4.0
    assert eval_expr(e, (1.0, 0.0)) == 1.0


def test_half_plane_entry():
    assert eval_expr(parse_expr("1/x2^2"), (0.3, 2.0)) == 0.25


@pytest.mark.parametrize("src,point,value", [
    ("x1+x2", (1.0, 2.0), 3.0),
    ("sin(x1)", (0.0,), 0.0),
    ("exp(0)", (), 1.0),
    ("sqrt(x1)*cosh(0)", (9.0,), 3.0),
    ("tanh(0)+sinh(0)+log(1)", (), 0.0),
    ("1.5e1", (), 15.0),
    (".5", (), 0.5),
])
def test_eval(src, point, value):
    assert eval_expr(parse_expr(src), point) == value


@pytest.mark.parametrize("src,point", [
    ("1/x1", (0.0,)),
    ("log(x1)", (0.0,)),
    ("log(x1)", (-1.0,)),
    ("sqrt(x1)", (-4.0,)),
    ("x1^0.5", (-4.0,)),
    ("exp(x1)", (1000.0,)),
])
def test_domain_errors(src, point):
    with pytest.raises(DomainError):
        eval_expr(parse_expr(src), point)


def test_point_too_short():
    with pytest.raises(ValueError):
        eval_expr(parse_expr("x3"), (1.0, 2.0))


@pytest.mark.parametrize("src,offset", [
    ("1+", 2),
    ("(x1", 3),
    ("x1 $ 2", 3),
    ("2**3", 2),
    ("x1 x2", 3),
    (")", 0),
])
def test_syntax_error_offsets(src, offset):
    with pytest.raises(ParseError) as info:
        parse_expr(src)
    assert info.value.offset == offset


def test_offsets_are_bytes():
    with pytest.raises(ParseError) as info:
        parse_expr("x1 + é")
    assert info.value.offset == 5


@pytest.mark.parametrize("src", ["y", "x0", "pi", "foo(x1)", "X1"])
def test_unknown_identifier(src):
    with pytest.raises(UnknownIdentifier):
        parse_expr(src)


@pytest.mark.parametrize("src", ["sin()", "sin(x1, x2)", "cos", "exp x1"])
def test_arity(src):
    with pytest.raises(ArityError):
        parse_expr(src)


MALFORMED = ["", "   ", "+", "-", "1 2", "()", "(()", "x1)", "sin(", "^2", "2^", "1//2",
             "x1..2", "1e", "3 +* 4", ",", "sin(,)", "x", "x-", "((x1)", "e5", "1.2.3",
             "\x00", "x1\n+", "sqrt(-)", "*x1", "x1^^2", "tanh((x1)"]


@pytest.mark.parametrize("src", MALFORMED)
def test_fuzz_corpus_rejected(src):
    with pytest.raises(ParseError):
        parse_expr(src)


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="x12(),+-*/^.e sincoqrtahlp", max_size=20))
def test_parser_never_crashes(src):
    try:
        parse_expr(src)
    except ParseError:
        pass


# -- differentiation -----------------------------------------------------------

def central4(f, x, k, h=1e-3):
    """Fourth-order central difference of f along coordinate k."""
    def at(d):
        y = list(x)
        y[k] += d
        return f(y)
    return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h)


def test_diff_examples():
    d = diff_expr(parse_expr("x1^2"), 1)
    for x in (-1.3, 0.0, 2.5):
        assert eval_expr(d, (x,)) == pytest.approx(2 * x, rel=1e-15, abs=0)
    assert eval_expr(diff_expr(parse_expr("x2"), 1), (0.3, 0.4)) == 0.0
    e = parse_expr("1/x2^2")
    d = diff_expr(e, 2)
    fd = central4(lambda p: eval_expr(e, p), (0.0, 1.0), 1)
    assert fd == pytest.approx(-2.0, rel=1e-9)
    assert eval_expr(d, (0.0, 1.0)) == pytest.approx(fd, rel=1e-9)


DIFF_CASES = [
    "4/((1+x1^2+x2^2)^2)",
    "4/((1-x1^2-x2^2)^2)",
    "sin(x1)*cos(x2)+exp(x1*x2)",
    "log(2+x1^2)*sqrt(3+x2)",
    "cosh(x1)^2 - sinh(x2)/tanh(1+x1^2)",
    "x1^x2",
    "(2+x1)^(1+x2^2)",
    "2^x1 * x2^3",
    "-x1/(1+x2^2)^0.5",
    "exp(-x1^2-x2^2)",
]


@pytest.mark.parametrize("src", DIFF_CASES)
def test_diff_matches_finite_differences(src):
    e = parse_expr(src)
    rng = random.Random(7)
    for _ in range(20):
        x = (rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.6))
        for k in range(2):
            sym = eval_expr(diff_expr(e, k + 1), x)
            fd = central4(lambda p: eval_expr(e, p), x, k)
            assert abs(sym - fd) <= 1e-6 * max(1.0, abs(fd)), (src, x, k, sym, fd)


@pytest.mark.parametrize("src", DIFF_CASES)
def test_derivative_is_in_grammar(src):
    d = diff_expr(diff_expr(parse_expr(src), 1), 2)
    again = parse_expr(serialize(d))
    x = (0.3, 0.4)
    assert eval_expr(again, x) == eval_expr(d, x)


@pytest.mark.parametrize("src", DIFF_CASES)
def test_round_trip_evaluates_identically(src):
    e = parse_expr(src)
    back = parse_expr(serialize(e))
    rng = random.Random(3)
    pts = [(rng.uniform(0.05, 0.7), rng.uniform(0.05, 0.7)) for _ in range(100)]
    assert [eval_expr(e, p) for p in pts] == [eval_expr(back, p) for p in pts]


def test_compiled_agrees_bitwise():
    exprs = [parse_expr(s) for s in DIFF_CASES]
    f = compile_exprs(exprs)
    rng = random.Random(11)
    for _ in range(50):
        p = [rng.uniform(0.05, 0.7), rng.uniform(0.05, 0.7)]
        assert f(p) == [eval_expr(e, p) for e in exprs]


def test_compiled_domain_error():
    f = compile_exprs([parse_expr("log(x1)")])
    with pytest.raises(DomainError):
        f([0.0])


_leaf = st.one_of(st.sampled_from([Var(1), Var(2)]),
                  st.floats(0.5, 3.0).map(lambda v: Num(round(v, 3))))


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*"), children, children).map(lambda t: BinOp(*t)),
        children.map(Neg),
        children.map(lambda c: BinOp("^", c, Num(2.0))),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "tanh"]), children).map(
            lambda t: parse_expr(f"{t[0]}({serialize(t[1])})")),
    )


@settings(max_examples=150, deadline=None)
@given(st.recursive(_leaf, _extend, max_leaves=8), st.floats(0.1, 0.6), st.floats(0.1, 0.6))
def test_random_trees_diff_and_round_trip(e, a, b):
    p = (a, b)
    try:
        val = eval_expr(e, p)
    except DomainError:
        return
    assert eval_expr(parse_expr(serialize(e)), p) == val
    for k in range(2):
        try:
            fd = central4(lambda q: eval_expr(e, q), p, k, h=1e-4)
            sym = eval_expr(diff_expr(e, k + 1), p)
        except DomainError:
            continue
        if math.isfinite(fd) and abs(fd) < 1e6:
            assert abs(sym - fd) <= 1e-6 * max(1.0, abs(fd))
