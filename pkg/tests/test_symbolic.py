from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cao.localsem import eval_expr
from cao.parser import Parser
from cao.symbolic import (
    FreshGen, OpApp, SymField, SymVal, mk_op, pretty_expr, substitute,
    symbols_of,
)
from cao.traces import ObjectState
from cao.values import FMap, NEVER, is_sem_value


def expr(src: str):
    return Parser(src).parse_expr()


WORKED = expr("this.f+i+hd(Cons(2,Nil))")


def test_worked_example_ground():
    st_ = ObjectState(FMap(i=1), FMap(f=2))
    assert pretty_expr(eval_expr(WORKED, st_)) == "5"


def test_worked_example_symbolic_heap():
    st_ = ObjectState(FMap(i=1), FMap(f=SymField("f", 1)))
    assert pretty_expr(eval_expr(WORKED, st_)) == "this.f_1 + 3"


def test_worked_example_fully_symbolic():
    st_ = ObjectState(FMap(i=SymVal("i")), FMap(f=SymField("f", 1)))
    assert pretty_expr(eval_expr(WORKED, st_)) == "this.f_1 + ?i + 2"


def test_hd_of_empty_list_undefined():
    st_ = ObjectState(FMap(), FMap())
    assert eval_expr(expr("hd(Nil)"), st_) is None
    assert eval_expr(expr("tl(Nil)"), st_) is None


def test_division():
    st_ = ObjectState(FMap(x=SymVal("x")), FMap())
    assert eval_expr(expr("1/2"), st_) == Fraction(1, 2)
    assert eval_expr(expr("1/0"), st_) is None
    # symbolic divisor keeps the application
    assert isinstance(eval_expr(expr("1/x"), st_), OpApp)
    d = eval_expr(expr("x/0"), st_)
    assert isinstance(d, OpApp)  # undefined only once ground


def test_negated_comparison_flips():
    x = SymVal("x")
    assert mk_op("!", mk_op("<", x, 5)) == OpApp(">=", (x, 5))
    assert mk_op("!", mk_op("==", x, 5)) == OpApp("!=", (x, 5))
    assert mk_op("!", True) is False


def test_substitute_folds():
    e = mk_op("+", SymField("f", 1), 1)
    assert substitute(e, {SymField("f", 1): 2}) == 3
    assert substitute(e, {}) == e


def test_freshgen_unique():
    fg = FreshGen()
    names = {fg.fresh_sym("v").name for _ in range(100)}
    assert len(names) == 100
    assert fg.fresh_heap_counter() == 1
    assert fg.fresh_heap_counter() == 2


_ground_values = st.one_of(
    st.integers(-20, 20), st.booleans(),
    st.lists(st.integers(-5, 5), max_size=3).map(tuple))


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_eval_lemma_on_ground_states(data):
    """Both halves of the expression lemma: a defined result over concrete
    state and heap is a semantic value, and any defined result without
    symbolic values is one."""
    i = data.draw(st.integers(-10, 10))
    f = data.draw(st.integers(-10, 10))
    xs = data.draw(st.lists(st.integers(-5, 5), max_size=4).map(tuple))
    st_ = ObjectState(FMap(i=i, xs=xs), FMap(f=f))
    src = data.draw(st.sampled_from([
        "this.f + i", "this.f * i - 2", "i < this.f", "!(i <= 0)",
        "len(xs)", "Cons(i, xs)", "hd(Cons(i, xs))", "tl(Cons(i, xs))",
        "i / this.f", "this.f == i", "i + 1 + 2",
    ]))
    v = eval_expr(expr(src), st_)
    if v is not None:
        assert is_sem_value(v)
        assert not symbols_of(v)


def test_pretty_precedence():
    st_ = ObjectState(FMap(x=SymVal("x")), FMap())
    assert pretty_expr(eval_expr(expr("x * (x + 1)"), st_)) == "?x * (?x + 1)"
    assert pretty_expr(eval_expr(expr("x - (x - 1)"), st_)) == "?x - (?x - 1)"
    assert pretty_expr(eval_expr(expr("(x * x) + 1"), st_)) == "?x * ?x + 1"
