from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussdegen import dsl
from gaussdegen.dsl import BinOp, DSLError, EvaluationError, Func, Neg, Num, Pow, Var


def test_precedence_and_associativity():
    e = dsl.parse_expr("1 - 2 - 3*t1^2/4", 1)
    assert dsl.eval_exact(e, {"t1": 2}) == Fraction(-4)
    assert dsl.eval_exact(dsl.parse_expr("(2^3)^2", 1)) == 64
    assert dsl.eval_exact(dsl.parse_expr("-t1^2", 1), {"t1": 3}) == -9
    assert dsl.eval_exact(dsl.parse_expr("t1^-2", 1), {"t1": 2}) == Fraction(1, 4)


def test_decimal_literals_are_exact():
    e = dsl.parse_expr("0.1 + 0.2", 1)
    assert dsl.eval_exact(e) == Fraction(3, 10)


def test_functions_and_jets():
    e = dsl.parse_expr("exp(t1)*sin(t2) + cos(t1*t2)", 2)
    jets = dsl.eval_exprs_jet([e], np.array([0.3, 0.5]), 2)
    value = np.exp(0.3) * np.sin(0.5) + np.cos(0.15)
    assert jets[0].value == pytest.approx(value)
    assert jets[0].partial((0, 1)) == pytest.approx(np.exp(0.3) * np.cos(0.5) - 0.3 * np.sin(0.15))


@pytest.mark.parametrize(
    "text, line, col",
    [
        ("t1 + * 2", 1, 6),
        ("sin t1", 1, 5),
        ("t1 +\n  t5", 2, 3),
        ("(t1 + 2", 1, 8),
        ("t1 ^ 1.5", 1, 6),
        ("t1 $ 2", 1, 4),
        ("tan(t1)", 1, 1),
    ],
)
def test_syntax_errors_report_positions(text, line, col):
    with pytest.raises(DSLError) as info:
        dsl.parse_expr(text, 2)
    assert (info.value.line, info.value.col) == (line, col)
    assert f"line {line}, column {col}" in str(info.value)


def test_file_parsing():
    spec = dsl.parse("# a comment\nparams n=2 ambient N=3 domain [-1,1]x[0,2.5]\n(1, t1, t2, t1*t2)  # trailing\n")
    assert (spec.n, spec.N) == (2, 3)
    assert spec.domain[1] == (Fraction(0), Fraction(5, 2))
    assert np.allclose(spec.evaluate([0.5, 2.0]), [1, 0.5, 2.0, 1.0])


def test_file_errors():
    with pytest.raises(DSLError, match="header"):
        dsl.parse("(1, t1)")
    with pytest.raises(DSLError, match="expected 4 coordinate"):
        dsl.parse("params n=1 ambient N=3 domain [0,1]\n(1, t1)")
    with pytest.raises(DSLError, match="unknown identifier 't2'"):
        dsl.parse("params n=1 ambient N=2 domain [0,1]\n(1, t1, t2)")
    with pytest.raises(DSLError, match="empty domain"):
        dsl.parse("params n=1 ambient N=1 domain [1,0]\n(1, t1)")
    with pytest.raises(DSLError, match="all coordinates vanish"):
        dsl.parse("params n=1 ambient N=1 domain [0,1]\n(0, 0*t1)")
    with pytest.raises(DSLError) as info:
        dsl.parse("params n=1 ambient N=1 domain [0,1]\n\n(1, t1 +)")
    assert info.value.line == 3


def test_evaluation_errors():
    spec = dsl.parse("params n=1 ambient N=1 domain [-1,1]\n(1, 1/t1)")
    with pytest.raises(EvaluationError):
        spec.derivatives(np.array([0.0]), 1)
    with pytest.raises(EvaluationError, match="outside"):
        spec.derivatives(np.array([2.0]), 1)
    with pytest.raises(EvaluationError):
        dsl.eval_exact(dsl.parse_expr("1/(t1 - t1)", 1), {"t1": 1})


def test_symbols_for_constants():
    e = dsl.parse_expr("-2*b23 + c", 0, symbols=("b23", "c"))
    assert dsl.eval_exact(e, {"b23": Fraction(1, 2), "c": 3}) == 2
    with pytest.raises(DSLError):
        dsl.parse_expr("t1", 0)


def test_transform_spec():
    spec = dsl.parse("params n=2 ambient N=2 domain [0,1]x[0,1]\n(1, t1, t2^2)")
    M = [[1, 0, 0], [1, 2, 0], [0, 0, 3]]
    A = [[0, 2], [1, 0]]
    b = [0, Fraction(1, 2)]
    new = dsl.transform_spec(spec, M, (A, b, [(0, 1), (0, 0.5)]))
    v = np.array([0.3, 0.2])
    u = np.array(A, float) @ v + np.array(b, float)
    assert np.allclose(new.evaluate(v), np.array(M, float) @ spec.evaluate(u))


# ------------------------------------------------------- round trip


def _num():
    return st.decimals(min_value=0, max_value=100, places=3, allow_nan=False, allow_infinity=False).map(
        lambda d: Num(Fraction(str(d)))
    )


def _trees():
    leaves = st.one_of(_num(), st.integers(1, 3).map(Var))
    return st.recursive(
        leaves,
        lambda kids: st.one_of(
            st.builds(BinOp, st.sampled_from("+-*/"), kids, kids),
            st.builds(Neg, kids),
            st.builds(Pow, kids, st.integers(-3, 4)),
            st.builds(Func, st.sampled_from(["sin", "cos", "exp"]), kids),
        ),
        max_leaves=12,
    )


@settings(max_examples=300, deadline=None)
@given(tree=_trees())
def test_print_parse_round_trip(tree):
    text = dsl.to_text(tree)
    assert dsl.parse_expr(text, 3) == tree


@settings(max_examples=50, deadline=None)
@given(exprs=st.lists(_trees(), min_size=2, max_size=4))
def test_file_round_trip(exprs):
    spec = dsl.VarietySpec(3, len(exprs) - 1, tuple(exprs), ((Fraction(0), Fraction(1)),) * 3)
    again = dsl.VarietySpec(3, spec.N, dsl.parse_tuple(dsl.tuple_text(exprs), 3), spec.domain)
    assert again == spec
    assert dsl.header_text(3, spec.N, spec.domain) == "params n=3 ambient N=%d domain [0,1]x[0,1]x[0,1]" % spec.N
