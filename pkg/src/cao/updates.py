"""Symbolic state updates for the sequent calculus.

An update normalizes to one parallel substitution from program variables
(including ``heap`` and ``result``) to terms; the right side wins on clashes.
Application substitutes into terms/formulas and simplifies select-over-store
chains by the connection axiom.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from . import ast
from .ast import (
    Bin, BoolLit, Builtin, FieldAcc, IntLit, NeverLit, NilLit, UnitLit, Un,
    Var,
)
from .fos import (
    FAnd, FApp, FBool, FCmp, FEq, FField, FImp, FLit, FNot, FOr, FProg,
    FVar, subst_formula, subst_term,
)
from .values import NEVER, UNIT


@dataclass(frozen=True)
class Upd:
    """A normalized parallel update: ((name, term), ...) sorted by name."""

    pairs: tuple = ()

    def lookup(self, name: str):
        for n, t in self.pairs:
            if n == name:
                return t
        return None

    def as_sub(self) -> dict:
        return {("prog", n): t for n, t in self.pairs}

    def __repr__(self) -> str:
        from .fos import pretty_term

        if not self.pairs:
            return "{}"
        return "{" + " || ".join(f"{n} := {pretty_term(t)}" for n, t in self.pairs) + "}"


EMPTY_UPD = Upd()


def upd_assign(name: str, term) -> Upd:
    return Upd(((name, term),))


def upd_par(u1: Upd, u2: Upd) -> Upd:
    """Parallel composition; the right update wins on clashes."""
    d = dict(u1.pairs)
    d.update(dict(u2.pairs))
    return Upd(tuple(sorted(d.items())))


def upd_seq(u1: Upd, u2: Upd) -> Upd:
    """{u1}u2: u2's terms are evaluated after u1."""
    shifted = Upd(tuple(sorted((n, apply_to_term(u1, t)) for n, t in u2.pairs)))
    return upd_par(u1, shifted)


def extend(u: Upd, name: str, term) -> Upd:
    """The update after executing ``name := term`` under ``u``."""
    return upd_seq(u, upd_assign(name, term))


def simp_term(t):
    """Connection-axiom simplification: select(store(h,f,v),g) resolves when
    both field names are constants."""
    if isinstance(t, FApp):
        args = tuple(simp_term(a) for a in t.args)
        if t.op == "select" and isinstance(args[0], FApp) and args[0].op == "store":
            h, f, v = args[0].args
            g = args[1]
            if isinstance(f, FField) and isinstance(g, FField):
                if f.name == g.name:
                    return v
                return simp_term(FApp("select", (h, g)))
        return FApp(t.op, args)
    return t


def simp_formula(f):
    if isinstance(f, FBool):
        return f
    if isinstance(f, FEq):
        l, r = simp_term(f.l), simp_term(f.r)
        if l == r:
            return FBool(True)
        return FEq(l, r)
    if isinstance(f, FCmp):
        return FCmp(f.op, simp_term(f.l), simp_term(f.r))
    if isinstance(f, FNot):
        inner = simp_formula(f.f)
        if isinstance(inner, FBool):
            return FBool(not inner.value)
        return FNot(inner)
    if isinstance(f, (FAnd, FOr, FImp)):
        return type(f)(simp_formula(f.l), simp_formula(f.r))
    from .fos import FAll, FEx, FPred

    if isinstance(f, FPred):
        return FPred(f.name, tuple(simp_term(a) for a in f.args))
    if isinstance(f, (FEx, FAll)):
        return type(f)(f.var, f.sort, simp_formula(f.body))
    raise AssertionError(f)


def apply_to_term(u: Upd, t):
    return simp_term(subst_term(t, u.as_sub()))


def apply_update(u: Upd, phi):
    """Apply a normalized update to a formula."""
    return simp_formula(subst_formula(phi, u.as_sub()))


# ----------------------------------------- expressions as terms and formulas


def term_of_expr(e: ast.Expr):
    if isinstance(e, IntLit):
        return FLit(e.value)
    if isinstance(e, BoolLit):
        return FLit(e.value)
    if isinstance(e, NilLit):
        return FLit(())
    if isinstance(e, NeverLit):
        return FLit(NEVER)
    if isinstance(e, UnitLit):
        return FLit(UNIT)
    if isinstance(e, Var):
        return FProg(e.name)
    if isinstance(e, FieldAcc):
        return FApp("select", (FProg("heap"), FField(e.name)))
    if isinstance(e, Un):
        return FApp(e.op, (term_of_expr(e.e),))
    if isinstance(e, Bin):
        return FApp(e.op, (term_of_expr(e.l), term_of_expr(e.r)))
    if isinstance(e, Builtin):
        return FApp(e.op, tuple(term_of_expr(a) for a in e.args))
    raise AssertionError(e)


def formula_of_expr(e: ast.Expr):
    """A Bool-typed expression as a formula (guards in sequents)."""
    if isinstance(e, BoolLit):
        return FBool(e.value)
    if isinstance(e, Un) and e.op == "!":
        return FNot(formula_of_expr(e.e))
    if isinstance(e, Bin):
        if e.op == "&&":
            return FAnd(formula_of_expr(e.l), formula_of_expr(e.r))
        if e.op == "||":
            return FOr(formula_of_expr(e.l), formula_of_expr(e.r))
        if e.op in ("<", "<=", ">", ">="):
            return FCmp(e.op, term_of_expr(e.l), term_of_expr(e.r))
        if e.op == "==":
            return FEq(term_of_expr(e.l), term_of_expr(e.r))
        if e.op == "!=":
            return FNot(FEq(term_of_expr(e.l), term_of_expr(e.r)))
    return FEq(term_of_expr(e), FLit(True))
