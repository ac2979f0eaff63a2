import json
import random

import pytest

from cao import ast
from cao.btypes import (
    CallAct, DownAct, PassiveT, Protocol, SeqT, SkipT, parse_btype, seq_list,
)
from cao.calculus import (
    PROVED, REFUTED, UNKNOWN, Prover, check_consistency, effective_protocol,
    initial_method, prove_all,
)
from cao.fos import FBool, FCmp, FLit, FProg
from cao.frontend import load_program
from cao.logic_parser import parse_fos
from cao.skeleton import infer_skeleton, weave_contract
from cao.updates import EMPTY_UPD

from helpers import (
    corpus_btype, corpus_program, random_straightline, run_straightline,
    random_fos_cond,
)


def _verdicts(prog, bt):
    vs, _ = prove_all(prog, bt)
    return {v.method: v.status for v in vs}


def test_flagship_proves():
    prog = corpus_program("flagship")
    bt = corpus_btype("flagship", prog)
    assert _verdicts(prog, bt) == {"T.test": PROVED, "Comp.cmp": PROVED,
                                   "Log.log": PROVED}
    assert check_consistency(prog, bt).consistent


def test_classfig_weave_proves_and_ge0_refuted():
    prog = corpus_program("classfig")
    bt = corpus_btype("classfig", prog)
    assert _verdicts(prog, bt)["T.test"] == PROVED
    from pathlib import Path

    bt0 = parse_btype((Path(__file__).parent.parent / "corpus" /
                       "classfig_ge0.btype").read_text(), prog)
    assert _verdicts(prog, bt0)["T.test"] == REFUTED


def test_classfig_contract_annotations_prove():
    prog = corpus_program("classfig")
    bt = corpus_btype("classfig_contract", prog)
    assert _verdicts(prog, bt)["T.test"] == PROVED


def test_wrong_callee_refuted():
    prog = corpus_program("flagship_wrongcallee")
    bt = corpus_btype("flagship", prog)
    vs = _verdicts(prog, bt)
    assert vs["T.test"] == REFUTED


def test_dropped_signflip_refuted():
    prog = corpus_program("flagship_nosignflip")
    bt = corpus_btype("flagship", prog)
    vs = _verdicts(prog, bt)
    assert vs["T.test"] == REFUTED


def test_method_calling_wrong_method_name_refuted():
    prog = corpus_program("flagship")
    bt = parse_btype("""
roles S -> this.S, L -> this.L;
type T.test : ?test(true) . S!Comp.cmp(true)
  . &({Comp.cmp}, result < 0){ S!Comp.cmp(true), skip } . down(true);
""", prog)
    vs = _verdicts(prog, bt)
    assert vs["T.test"] == REFUTED


def test_await_method_reports_unknown():
    prog = corpus_program("awaitfut")
    bt = parse_btype("roles w -> this.w;\n"
                     "type Boss.run : ?run(true) . down(true);", prog)
    vs, _ = prove_all(prog, bt)
    v = next(x for x in vs if x.method == "Boss.run")
    assert v.status == UNKNOWN
    assert any(o.get("kind") == "await" for o in v.obligations)


def test_missing_invariant_reports_location():
    prog = corpus_program("selectability")
    bt = parse_btype("""
roles s -> this.s;
type Drv.drive : ?drive(true)
  . (s!Sel.m(true) . &({Sel.m}, true){ skip, skip })* . down(true);
""", prog)
    vs, _ = prove_all(prog, bt)
    v = next(x for x in vs if x.method == "Drv.drive")
    assert v.status == UNKNOWN
    assert any(o.get("kind") == "invariant" and o.get("loop") == 0
               for o in v.obligations)


def test_selectability_proves_with_invariant():
    prog = corpus_program("selectability")
    bt = corpus_btype("selectability", prog)
    assert set(_verdicts(prog, bt).values()) == {PROVED}
    assert check_consistency(prog, bt).consistent


# ------------------------------------------------------------- consistency


def test_consistency_positive_and_witness():
    prog = corpus_program("positive")
    bt = corpus_btype("positive", prog)
    rep = check_consistency(prog, bt)
    assert rep.consistent and rep.initial_ok

    from pathlib import Path

    bad = parse_btype((Path(__file__).parent.parent / "corpus" /
                       "positive_bad.btype").read_text(), prog)
    rep2 = check_consistency(prog, bad)
    assert not rep2.consistent
    failing = [c for c in rep2.checks if c["status"] != "valid"]
    assert failing and failing[0]["callee"] == "Wrk.pos"
    assert "witness" in failing[0]


def test_consistency_initial_method_must_be_trivial():
    prog = corpus_program("classfig")
    bt = corpus_btype("classfig", prog)
    rep = check_consistency(prog, bt)
    assert initial_method(prog) == "T.test"
    assert not rep.initial_ok and not rep.consistent


# ----------------------------------------------------------------- skeleton


def test_infer_skeleton_matches_figure_shape():
    prog = corpus_program("classfig")
    proto = infer_skeleton(prog, "T.test")
    items = seq_list(proto.body)
    assert isinstance(items[0], CallAct) and items[0].method == "Comp.cmp"
    assert isinstance(items[1], PassiveT)
    assert set(items[1].methods) == set(prog.qualified_methods())
    assert items[1].phi == FBool(True)
    from cao.btypes import ChoiceT

    inner = items[1].left
    assert isinstance(inner, ChoiceT) and len(inner.branches) == 2
    assert isinstance(inner.branches[0], CallAct)
    assert inner.branches[0].method == "Log.log"
    assert isinstance(inner.branches[1], SkipT)
    assert isinstance(items[1].right, SkipT)
    assert isinstance(items[2], DownAct)


def test_weave_straightline_contract():
    prog = load_program("""
    class W(){ Int m(Int i){ return i; } }
    main{ W w1 = W(); w1!m(1); }
    """)
    proto = infer_skeleton(prog, "W.m")
    woven = weave_contract(proto, parse_fos("i >= 0"),
                           parse_fos("result >= 0"), None)
    assert woven.pre == parse_fos("i >= 0")
    down = seq_list(woven.body)[-1]
    assert isinstance(down, DownAct)
    from cao.fos import pretty_fos

    assert "result >= 0" in pretty_fos(down.phi)


def test_weave_constructor_invariant_only_on_termination():
    prog = load_program("""
    class W(){ Int q = 0; Int m(Int i){ return i; } }
    main{ W w1 = W(); w1!m(1); }
    """)
    proto = infer_skeleton(prog, "W.m")
    inv = parse_fos("this.q >= 0")
    ctor = weave_contract(proto, FBool(True), FBool(True), inv,
                          is_constructor=True)
    assert ctor.pre == FBool(True)
    from cao.fos import pretty_fos

    assert "this.q >= 0" in pretty_fos(seq_list(ctor.body)[-1].phi)


# ---------------------------------------------------------------- ex-sync


def test_rule_ex_sync_positive_read():
    prog = load_program("""
    class P(Q q1){
      Int use(Int i){
        Fut<Int> f = q1!mk(i);
        Int r = f.get_0;
        return r;
      }
    }
    class Q(){ Int mk(Int z){ return z * z + 1; } }
    main{ Q qq = Q(); P pp = P(qq); pp!use(2); }
    """)
    bt = parse_btype("getpost at get 0 from Q.mk : result > 0;", prog)
    prover = Prover(prog, bt)
    cls = prog.class_decl("P")
    md = prog.method_decl("P", "use")
    node = prover.prove_pst([FBool(True)], EMPTY_UPD, ast.stmt_list(md.body),
                            parse_fos("result > 0"), cls)

    def find(n, rule):
        if n.rule == rule:
            return n
        for p in n.premises:
            hit = find(p, rule)
            if hit is not None:
                return hit
        return None

    # Q.mk returns z*z+1: nonlinear, so the callee obligation stays open,
    # but the continuation uses the annotation
    assert find(node, "ex-sync") is not None
    assert node.status in (PROVED, UNKNOWN)
    # with a linear callee everything closes
    prog2 = load_program("""
    class P(Q q1){
      Int use(Int i){
        Fut<Int> f = q1!mk(i);
        Int r = f.get_0;
        return r;
      }
    }
    class Q(){ Int mk(Int z){ return 5; } }
    main{ Q qq = Q(); P pp = P(qq); pp!use(2); }
    """)
    bt2 = parse_btype("getpost at get 0 from Q.mk : result > 0;", prog2)
    prover2 = Prover(prog2, bt2)
    node2 = prover2.prove_pst([FBool(True)], EMPTY_UPD,
                              ast.stmt_list(prog2.method_decl("P", "use").body),
                              parse_fos("result > 0"),
                              prog2.class_decl("P"))
    assert node2.status == PROVED


def test_rule_ex_sync_trivial_postcondition_degenerates():
    prog = corpus_program("flagship")
    bt = parse_btype("getpost at get 0 from Comp.cmp : true;", prog)
    prover = Prover(prog, bt)
    prem = prover.rule_ex_sync(0, "Comp.cmp", FBool(True))
    assert all(p.status == PROVED for p in prem)


def test_rule_ex_sync_wrong_resolver_fails():
    prog = corpus_program("flagship")
    bt = parse_btype("", prog)
    prover = Prover(prog, bt)
    prem = prover.rule_ex_sync(0, "Log.log", FBool(True))
    assert prem[0].status == UNKNOWN  # {Comp.cmp} is not within {Log.log}


# -------------------------------------------------------------- proof trees


def test_proof_tree_replay_deterministic():
    prog = corpus_program("flagship")
    bt = corpus_btype("flagship", prog)
    v1, _ = prove_all(prog, bt)
    v2, _ = prove_all(prog, bt)
    t1 = [v.to_json() for v in v1]
    t2 = [v.to_json() for v in v2]
    assert json.dumps(t1, sort_keys=True) == json.dumps(t2, sort_keys=True)
    # the serialized tree labels every inner node with its rule
    def rules(n):
        yield n["rule"]
        for p in n["premises"]:
            yield from rules(p)

    names = set()
    for v in t1:
        if v["tree"]:
            names |= set(rules(v["tree"]))
    assert {"met-call", "met-get", "met-return", "vc", "ex1"} <= names


# ----------------------------------------------------- Hoare differential


def hoare_differential(n_programs: int, seed: int = 13):
    """Symbolic-execution verdicts on {pre}s{post} agree with brute-force
    enumeration over bounded inputs."""
    rng = random.Random(seed)
    names = ["x", "y"]
    domain = list(range(-2, 3))
    bounds = [parse_fos("x >= -2"), parse_fos("x <= 2"),
              parse_fos("y >= -2"), parse_fos("y <= 2")]
    prog = load_program("class H(){ Int m(){ return 0; } } "
                        "main{ H h = H(); h!m(); }")
    bt = parse_btype("", prog)
    prover = Prover(prog, bt, model_domain=domain)
    cls = prog.class_decl("H")
    agree = proved = refuted = 0
    disagreements = []
    import itertools

    for _ in range(n_programs):
        stmts = random_straightline(rng, names)
        pre = random_fos_cond(rng, names)
        post = random_fos_cond(rng, names)
        node = prover.prove_pst(bounds + [pre], EMPTY_UPD, list(stmts), post, cls)
        if node.status == UNKNOWN:
            continue
        violated = False
        from cao.fos import Domains, eval_fos, subst_formula
        from cao.fos import FLit

        for combo in itertools.product(domain, repeat=len(names)):
            sub = {("prog", n): FLit(v) for n, v in zip(names, combo)}
            dom0 = Domains({}, frozenset())
            if eval_fos(subst_formula(pre, sub), None, {}, dom0) is not True:
                continue
            st, _res = run_straightline(list(stmts), dict(zip(names, combo)))
            endsub = {("prog", n): FLit(st.sigma[n]) for n in names}
            if eval_fos(subst_formula(post, endsub), None, {}, dom0) is not True:
                violated = True
                break
        if node.status == PROVED:
            ok = not violated
            proved += 1
        else:
            ok = violated
            refuted += 1
        if ok:
            agree += 1
        else:
            disagreements.append((stmts, pre, post, node.status))
    return agree, proved, refuted, disagreements


def test_hoare_differential_small():
    agree, proved, refuted, dis = hoare_differential(120, seed=13)
    assert not dis, dis[:2]
    assert proved > 5 and refuted > 5


def test_contract_on_awaiting_method_is_unknown_not_crash():
    prog = corpus_program("awaitfut")
    bt = parse_btype("roles w -> this.w;\n"
                     "contract Boss.run : pre true post result >= 0;", prog)
    vs, _ = prove_all(prog, bt)
    v = next(x for x in vs if x.method == "Boss.run")
    assert v.status == UNKNOWN
    assert any(o.get("kind") == "await" for o in v.obligations)
    rep = check_consistency(prog, bt)
    assert rep.consistent  # no obligations derivable, nothing contradicted
