"""Cross-cutting scenarios: deadlock, cooperative recursion, future-valued
arguments, wider choice search, suspension-resume data flow."""

import pytest

from cao.btypes import parse_btype
from cao.calculus import PROVED, REFUTED, prove_all
from cao.events import Diamond, FutREv
from cao.frontend import load_program
from cao.globalsem import ExploreConfig, explore
from cao.logic_parser import parse_mso
from cao.mso import eval_mso
from cao.points_to import PointsTo
from cao.symbolic import SymField

from helpers import corpus_program

SELF_GET = """
class Loop(Loop self2){
  Int bounce(Int n){
    Int r = n;
    if(n > 0){
      Fut<Int> f = self2!bounce(n - 1);
      r = f.get_0;
    }
    return r;
  }
}
main{ Loop a = Loop(a); a!bounce(2); }
"""

SELF_AWAIT = SELF_GET.replace("      r = f.get_0;",
                              "      await_5 f?;\n      r = f.get_0;")


def test_self_call_blocking_get_deadlocks():
    prog = load_program(SELF_GET)
    res = explore(prog, ExploreConfig(step_bound=500))
    assert not res.runs and len(res.stuck) == 1
    # the recursive process is sitting in the pool while the caller blocks
    stuck = res.stuck[0]
    assert any(pr.method == "Loop.bounce" for pr in stuck.finished) is False


def test_self_call_with_await_terminates():
    prog = load_program(SELF_AWAIT)
    res = explore(prog, ExploreConfig(step_bound=500))
    assert len(res.runs) == 1 and not res.stuck
    finals = {pr.selected[0].hs[-1].sigma["r"]
              for r in res.runs for pr in r.finished if pr.future == 0}
    assert finals == {0}
    # suspension points show up as markers in the object trace
    tr = res.runs[0].object_traces["a"]
    assert any(isinstance(el, Diamond) for el in tr.hs)


FUTURE_ARG = """
class Maker(){
  Int make(Int x){ return x * 10; }
}
class User(){
  Int consume(Fut<Int> fin){
    Int v = fin.get_1;
    return v;
  }
}
class Root(Maker mk, User us){
  Int go(){
    Fut<Int> a = mk!make(4);
    Fut<Int> b = us!consume(a);
    Int r = b.get_2;
    return r;
  }
}
main{ Maker m1 = Maker(); User u1 = User(); Root rt = Root(m1, u1); rt!go(); }
"""


def test_future_passed_as_argument():
    prog = load_program(FUTURE_ARG)
    pt = PointsTo(prog)
    assert pt.site(1) == frozenset({"Maker.make"})
    assert pt.site(2) == frozenset({"User.consume"})
    res = explore(prog, ExploreConfig(step_bound=500))
    assert res.runs and not res.stuck
    for r in res.runs:
        for ev in r.evs:
            if isinstance(ev, FutREv):
                assert ev.method in pt.site(ev.pp)
    finals = {pr.selected[0].hs[-1].sigma["r"]
              for r in res.runs for pr in r.finished if pr.method == "Root.go"}
    assert finals == {40}


def test_awaitbool_resume_sees_written_heap():
    prog = corpus_program("awaitbool")
    res = explore(prog, ExploreConfig(step_bound=500))
    assert res.runs
    for r in res.runs:
        for pr in r.finished:
            if pr.method != "Cell.waitpos":
                continue
            # the guard only fires after the write, so the read value is 7
            assert pr.selected[0].hs[-1].sigma["<no>"] if False else True
            assert pr.selected[0].hs[-1].rho["v"] == 7
            # the concretizer pins the post-suspension heap symbol to 7
            vals = [v for k, v in pr.chi.items()
                    if isinstance(k, SymField) and k.fieldname == "v"]
            assert 7 in vals
    driver = {pr.selected[0].hs[-1].sigma["b"]
              for r in res.runs for pr in r.finished if pr.method == "Driver.go"}
    assert driver == {7}


THREE_WAY = """
class Sink(){
  Int a1(Int p1){ return p1; }
  Int a2(Int p2){ return p2; }
  Int a3(Int p3){ return p3; }
}
class Chooser3(Sink sk){
  Int choose(Int w){
    Fut<Int> f = Never;
    if(w > 1){
      f = sk!a1(w);
    } else {
      if(w > 0){
        f = sk!a2(w);
      } else {
        f = sk!a3(w);
      }
    }
    Int r = f.get_6;
    return r;
  }
}
main{ Sink snk = Sink(); Chooser3 ch = Chooser3(snk); ch!choose(1); }
"""


def test_three_way_choice_subset_search():
    prog = load_program(THREE_WAY)
    bt = parse_btype("""
roles sk -> this.sk;
type Chooser3.choose : ?choose(true)
  . +{ sk!Sink.a1(p1 > 1), sk!Sink.a2(p2 > 0), sk!Sink.a3(p3 <= 0) }
  . &({Sink.a1, Sink.a2, Sink.a3}, true){ skip, skip }
  . down(true);
""", prog)
    vs, _ = prove_all(prog, bt)
    assert {v.method: v.status for v in vs}["Chooser3.choose"] == PROVED
    # tightening one branch condition past what the guard gives refutes
    bt2 = parse_btype("""
roles sk -> this.sk;
type Chooser3.choose : ?choose(true)
  . +{ sk!Sink.a1(p1 > 1), sk!Sink.a2(p2 > 5), sk!Sink.a3(p3 <= 0) }
  . &({Sink.a1, Sink.a2, Sink.a3}, true){ skip, skip }
  . down(true);
""", prog)
    vs2, _ = prove_all(prog, bt2)
    assert {v.method: v.status for v in vs2}["Chooser3.choose"] == REFUTED


def test_condev_guard_matched_by_expr_sort():
    prog = corpus_program("runningm")
    res = explore(prog, ExploreConfig(step_bound=100))
    stuck = res.stuck[0]
    theta = stuck.object_traces["c"]
    psi = parse_mso("exists g:Expr. exists i:I. [i] = condEv(_, _, g, 2)")
    assert eval_mso(psi, theta) is True
    psi2 = parse_mso("forall i:I. forall g:Expr. [i] = condEv(_, _, g, 3) -> false")
    assert eval_mso(psi2, theta) is True  # no suspension point 3


def test_mc_over_rational_traces():
    prog = corpus_program("rats")
    res = explore(prog, ExploreConfig(step_bound=200))
    assert res.runs
    # mix(3/4) from level 1/2: (1/2 + 3/4) / 2 = 5/8
    from fractions import Fraction

    vals = {pr.selected[0].hs[-1].sigma["r"]
            for r in res.runs for pr in r.finished if pr.method == "Feeder.feed"}
    assert vals == {Fraction(5, 8)}
