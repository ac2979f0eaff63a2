"""First-order state logic: formulas over a single object state.

Evaluation is three-valued (True / False / None for "unknown") so that
quantifiers over under-approximated numeric carriers never yield a wrong
definite verdict.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional

from .parser import CaoError
from .symbolic import _fold  # ground operator table
from .traces import ObjectState
from .values import FMap, is_sem_value


class CaoLogicError(CaoError):
    pass


# -------------------------------------------------------------------- terms


@dataclass(frozen=True)
class FVar:
    name: str


@dataclass(frozen=True)
class FProg:
    """A program variable; ``heap`` denotes the state's heap and ``result``
    only ever appears before being substituted away."""

    name: str


@dataclass(frozen=True)
class FField:
    """A field-name constant (second argument of select/store)."""

    name: str


@dataclass(frozen=True)
class FLit:
    value: Any


@dataclass(frozen=True)
class FApp:
    op: str
    args: tuple


# ----------------------------------------------------------------- formulas


@dataclass(frozen=True)
class FBool:
    value: bool


@dataclass(frozen=True)
class FPred:
    """An uninterpreted predicate; ground evaluation knows only the ones
    listed as scheme assumptions (interpreted as True)."""

    name: str
    args: tuple = ()


@dataclass(frozen=True)
class FEq:
    l: Any
    r: Any


@dataclass(frozen=True)
class FCmp:
    op: str  # < <= > >=
    l: Any
    r: Any


@dataclass(frozen=True)
class FNot:
    f: Any


@dataclass(frozen=True)
class FAnd:
    l: Any
    r: Any


@dataclass(frozen=True)
class FOr:
    l: Any
    r: Any


@dataclass(frozen=True)
class FImp:
    l: Any
    r: Any


@dataclass(frozen=True)
class FEx:
    var: str
    sort: str
    body: Any


@dataclass(frozen=True)
class FAll:
    var: str
    sort: str
    body: Any


TRUE = FBool(True)
FALSE = FBool(False)


def fand(*fs):
    out = None
    for f in fs:
        if f == TRUE:
            continue
        out = f if out is None else FAnd(out, f)
    return TRUE if out is None else out


# ------------------------------------------------------------- substitution


def subst_term(t, sub: dict):
    """Replace FVar/FProg occurrences per ``sub`` (maps name -> term)."""
    if isinstance(t, FVar) and ("var", t.name) in sub:
        return sub[("var", t.name)]
    if isinstance(t, FProg) and ("prog", t.name) in sub:
        return sub[("prog", t.name)]
    if isinstance(t, FApp):
        return FApp(t.op, tuple(subst_term(a, sub) for a in t.args))
    return t


def subst_formula(f, sub: dict):
    if isinstance(f, (FBool,)):
        return f
    if isinstance(f, FPred):
        return FPred(f.name, tuple(subst_term(a, sub) for a in f.args))
    if isinstance(f, FEq):
        return FEq(subst_term(f.l, sub), subst_term(f.r, sub))
    if isinstance(f, FCmp):
        return FCmp(f.op, subst_term(f.l, sub), subst_term(f.r, sub))
    if isinstance(f, FNot):
        return FNot(subst_formula(f.f, sub))
    if isinstance(f, (FAnd, FOr, FImp)):
        return type(f)(subst_formula(f.l, sub), subst_formula(f.r, sub))
    if isinstance(f, (FEx, FAll)):
        inner = {k: v for k, v in sub.items() if k != ("var", f.var)}
        return type(f)(f.var, f.sort, subst_formula(f.body, inner))
    raise AssertionError(f)


def formula_mentions_prog(f, name: str) -> bool:
    def t_has(t):
        if isinstance(t, FProg):
            return t.name == name
        if isinstance(t, FApp):
            return any(t_has(a) for a in t.args)
        return False

    if isinstance(f, FBool):
        return False
    if isinstance(f, FPred):
        return any(t_has(a) for a in f.args)
    if isinstance(f, (FEq, FCmp)):
        return t_has(f.l) or t_has(f.r)
    if isinstance(f, FNot):
        return formula_mentions_prog(f.f, name)
    if isinstance(f, (FAnd, FOr, FImp)):
        return formula_mentions_prog(f.l, name) or formula_mentions_prog(f.r, name)
    if isinstance(f, (FEx, FAll)):
        return formula_mentions_prog(f.body, name)
    raise AssertionError(f)


# --------------------------------------------------------------- evaluation


class _Anon(Exception):
    pass


class _IllSorted(Exception):
    """A transient sort mismatch during carrier enumeration; the enclosing
    atom answers unknown."""


def eval_term(t, st: Optional[ObjectState], beta: dict):
    if isinstance(t, FLit):
        return t.value
    if isinstance(t, FVar):
        if t.name not in beta:
            raise CaoLogicError(f"unbound logical variable {t.name!r}")
        return beta[t.name]
    if isinstance(t, FField):
        return t.name
    if isinstance(t, FProg):
        if st is None:
            raise CaoLogicError(f"program variable {t.name!r} outside a state")
        if t.name == "heap":
            return st.rho
        try:
            return st.sigma[t.name]
        except KeyError:
            raise CaoLogicError(f"program variable {t.name!r} not in state")
    if isinstance(t, FApp):
        if t.op == "anon":
            raise _Anon()  # no ground semantics; only the prover handles it
        args = [eval_term(a, st, beta) for a in t.args]
        if t.op == "select":
            h, f = args
            if not isinstance(h, FMap):
                raise _IllSorted()
            try:
                return h[f]
            except KeyError:
                raise _IllSorted()
        if t.op == "store":
            h, f, v = args
            if not isinstance(h, FMap):
                raise _IllSorted()
            return h.set(f, v)
        if t.op == "index":
            seq, i = args
            if not isinstance(seq, tuple) or not isinstance(i, int) \
                    or isinstance(i, bool) or not 0 <= i < len(seq):
                raise _IllSorted()
            return seq[i]
        v = _fold(t.op, tuple(args))
        if v is None:
            raise _IllSorted()
        return v
    raise AssertionError(t)


def k_not(a):
    return None if a is None else (not a)


def k_and(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def k_or(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def k_imp(a, b):
    return k_or(k_not(a), b)


@dataclass
class Domains:
    """Finite quantifier carriers per sort. Sorts in ``hedged`` enumerate an
    under-approximation: a quantifier that is not decided by the listed
    values answers unknown."""

    carriers: dict
    hedged: frozenset = frozenset()

    def carrier(self, sort: str) -> list:
        if sort not in self.carriers:
            raise CaoLogicError(f"no carrier for sort {sort!r}")
        return self.carriers[sort]


def basic_domains(values=(), halo: int = 8) -> Domains:
    ints = sorted({v for v in values if isinstance(v, int) and not isinstance(v, bool)})
    lo = min(ints, default=0) - halo
    hi = max(ints, default=0) + halo
    intc = list(range(lo, hi + 1))
    return Domains(
        {"Int": intc, "Nat": [n for n in intc if n >= 0], "Bool": [False, True],
         "Rat": [Fraction(n) for n in intc] + [Fraction(n, 2) for n in intc],
         "Any": sorted({v for v in values}, key=repr)},
        hedged=frozenset({"Int", "Nat", "Rat"}),
    )


def eval_fos(phi, st: Optional[ObjectState], beta: dict, domains: Domains,
             assumed: frozenset = frozenset(), approx: Optional[list] = None):
    """Three-valued evaluation of a state formula; None means unknown.

    Quantifiers over hedged (numeric) sorts decide over the finite carrier
    and mark the verdict approximate via the ``approx`` box instead of
    failing: the checker is a tester for those sorts."""
    try:
        return _eval_f(phi, st, beta, domains, assumed,
                       approx if approx is not None else [])
    except _Anon:
        raise CaoLogicError("anon(h) has no ground semantics")


def _eval_f(phi, st, beta, domains, assumed, approx):
    if isinstance(phi, FBool):
        return phi.value
    if isinstance(phi, FPred):
        if phi.name in assumed:
            return True
        return None  # uninterpreted predicate: unknown in ground evaluation
    if isinstance(phi, FEq):
        try:
            return eval_term(phi.l, st, beta) == eval_term(phi.r, st, beta)
        except _IllSorted:
            return None
    if isinstance(phi, FCmp):
        try:
            l, r = eval_term(phi.l, st, beta), eval_term(phi.r, st, beta)
        except _IllSorted:
            return None
        v = _fold(phi.op, (l, r))
        if v is None:
            return None  # unsorted comparison: unknown
        return v
    if isinstance(phi, FNot):
        return k_not(_eval_f(phi.f, st, beta, domains, assumed, approx))
    if isinstance(phi, FAnd):
        l = _eval_f(phi.l, st, beta, domains, assumed, approx)
        if l is False:
            return False
        return k_and(l, _eval_f(phi.r, st, beta, domains, assumed, approx))
    if isinstance(phi, FOr):
        l = _eval_f(phi.l, st, beta, domains, assumed, approx)
        if l is True:
            return True
        return k_or(l, _eval_f(phi.r, st, beta, domains, assumed, approx))
    if isinstance(phi, FImp):
        l = _eval_f(phi.l, st, beta, domains, assumed, approx)
        if l is False:
            return True
        return k_imp(l, _eval_f(phi.r, st, beta, domains, assumed, approx))
    if isinstance(phi, (FEx, FAll)):
        carrier = domains.carrier(phi.sort)
        hedged = phi.sort in domains.hedged
        hit_unknown = False
        for v in carrier:
            b2 = dict(beta)
            b2[phi.var] = v
            r = _eval_f(phi.body, st, b2, domains, assumed, approx)
            if isinstance(phi, FEx) and r is True:
                return True
            if isinstance(phi, FAll) and r is False:
                return False
            if r is None:
                hit_unknown = True
        if hit_unknown:
            return None
        if hedged:
            # decided over the carrier only: a tester verdict
            approx.append(phi.sort)
        return False if isinstance(phi, FEx) else True
    raise AssertionError(phi)


# ------------------------------------------------------------------- pretty


def pretty_term(t) -> str:
    from .symbolic import pretty_expr

    if isinstance(t, FVar):
        return t.name
    if isinstance(t, FProg):
        return t.name
    if isinstance(t, FField):
        return t.name
    if isinstance(t, FLit):
        return pretty_expr(t.value)
    if isinstance(t, FApp):
        if t.op == "index":
            return f"{pretty_term(t.args[0])}[{pretty_term(t.args[1])}]"
        if t.op == "select" and isinstance(t.args[0], FProg) \
                and t.args[0].name == "heap":
            return f"this.{pretty_term(t.args[1])}"
        if t.op in ("select", "store", "anon", "len", "hd", "tl", "Cons"):
            return f"{t.op}(" + ", ".join(pretty_term(a) for a in t.args) + ")"
        if t.op == "neg":
            return f"-{pretty_term(t.args[0])}"
        if t.op == "!":
            return f"!{pretty_term(t.args[0])}"
        if len(t.args) == 2:
            return f"({pretty_term(t.args[0])} {t.op} {pretty_term(t.args[1])})"
    raise AssertionError(t)


def pretty_fos(f) -> str:
    if isinstance(f, FBool):
        return "true" if f.value else "false"
    if isinstance(f, FPred):
        if not f.args:
            return f.name
        return f"{f.name}(" + ", ".join(pretty_term(a) for a in f.args) + ")"
    if isinstance(f, FEq):
        return f"{pretty_term(f.l)} = {pretty_term(f.r)}"
    if isinstance(f, FCmp):
        return f"{pretty_term(f.l)} {f.op} {pretty_term(f.r)}"
    if isinstance(f, FNot):
        return f"!({pretty_fos(f.f)})"
    if isinstance(f, FAnd):
        return f"({pretty_fos(f.l)} & {pretty_fos(f.r)})"
    if isinstance(f, FOr):
        return f"({pretty_fos(f.l)} | {pretty_fos(f.r)})"
    if isinstance(f, FImp):
        return f"({pretty_fos(f.l)} -> {pretty_fos(f.r)})"
    if isinstance(f, FEx):
        return f"(exists {f.var}:{f.sort}. {pretty_fos(f.body)})"
    if isinstance(f, FAll):
        return f"(forall {f.var}:{f.sort}. {pretty_fos(f.body)})"
    raise AssertionError(f)
