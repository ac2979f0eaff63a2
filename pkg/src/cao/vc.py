"""Conservative three-valued discharge of first-order verification conditions.

Pipeline: negate the goal, push to DNF, then refute every cube by congruence
closure over the uninterpreted term structure followed by Fourier-Motzkin
elimination over exact rationals (integers by relaxation). Nonlinear or
quantified conditions answer unknown; a concrete counterexample found by
bounded enumeration answers invalid. Never a wrong definite answer.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional

from .fos import (
    FAll, FAnd, FApp, FBool, FCmp, FEq, FEx, FField, FImp, FLit, FNot, FOr,
    FPred, FProg, FVar, pretty_fos, pretty_term,
)
from .updates import simp_term

_CUBE_CAP = 4096
_FM_ROW_CAP = 4000


@dataclass
class VCResult:
    status: str  # valid | invalid | unknown
    model: Optional[dict] = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.status == "valid"


class _Quantified(Exception):
    pass


def _nnf(f, pos: bool):
    if isinstance(f, FBool):
        return FBool(f.value if pos else not f.value)
    if isinstance(f, (FEq, FCmp, FPred)):
        return f if pos else FNot(f)
    if isinstance(f, FNot):
        return _nnf(f.f, not pos)
    if isinstance(f, FAnd):
        l, r = _nnf(f.l, pos), _nnf(f.r, pos)
        return FAnd(l, r) if pos else FOr(l, r)
    if isinstance(f, FOr):
        l, r = _nnf(f.l, pos), _nnf(f.r, pos)
        return FOr(l, r) if pos else FAnd(l, r)
    if isinstance(f, FImp):
        return _nnf(FOr(FNot(f.l), f.r), pos)
    if isinstance(f, (FEx, FAll)):
        raise _Quantified()
    raise AssertionError(f)


def _dnf(f) -> list:
    """List of cubes (lists of literals); literals are atoms or FNot(atom)."""
    if isinstance(f, FBool):
        return [[]] if f.value else []
    if isinstance(f, (FEq, FCmp, FPred, FNot)):
        return [[f]]
    if isinstance(f, FOr):
        return _dnf(f.l) + _dnf(f.r)
    if isinstance(f, FAnd):
        ls, rs = _dnf(f.l), _dnf(f.r)
        if len(ls) * len(rs) > _CUBE_CAP:
            raise _Quantified()  # treated as "too large": unknown
        return [a + b for a in ls for b in rs]
    raise AssertionError(f)


# ---------------------------------------------------------- congruence closure


class _Congruence:
    def __init__(self):
        self.parent: dict = {}
        self.args: dict = {}  # key -> (op, argkeys)
        self.uses: dict = {}  # key -> parent keys
        self.terms: dict = {}  # key -> a representative term

    def add(self, t) -> str:
        t = simp_term(t)
        if isinstance(t, FApp):
            # fresh heap constants for anon(h)
            argkeys = tuple(self.add(a) for a in t.args)
            key = f"{t.op}({','.join(argkeys)})"
            if key not in self.parent:
                self.parent[key] = key
                self.args[key] = (t.op, argkeys)
                self.terms[key] = t
                for a in argkeys:
                    self.uses.setdefault(a, set()).add(key)
            return key
        key = _atom_key(t)
        if key not in self.parent:
            self.parent[key] = key
            self.terms[key] = t
        return key

    def find(self, k: str) -> str:
        while self.parent[k] != k:
            self.parent[k] = self.parent[self.parent[k]]
            k = self.parent[k]
        return k

    def union(self, a: str, b: str):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        self.parent[ra] = rb
        # re-congruence to a fixpoint: applications with equal argument
        # classes merge
        changed = True
        while changed:
            changed = False
            sig: dict = {}
            for k, (op, argkeys) in self.args.items():
                s = (op, tuple(self.find(x) for x in argkeys))
                if s in sig:
                    if self.find(sig[s]) != self.find(k):
                        self.parent[self.find(k)] = self.find(sig[s])
                        changed = True
                else:
                    sig[s] = k


def _atom_key(t) -> str:
    if isinstance(t, FLit):
        return f"lit:{t.value!r}"
    if isinstance(t, FVar):
        return f"var:{t.name}"
    if isinstance(t, FProg):
        return f"prog:{t.name}"
    if isinstance(t, FField):
        return f"field:{t.name}"
    raise AssertionError(t)


# ----------------------------------------------------------- linear arithmetic


class _NonLinear(Exception):
    pass


def _lin(t, cc: _Congruence, atoms: dict):
    """term -> (coeffs: dict[var,Fraction], const: Fraction) over class reps."""
    t = simp_term(t)
    if isinstance(t, FLit) and isinstance(t.value, (int, Fraction)) \
            and not isinstance(t.value, bool):
        return {}, Fraction(t.value)
    if isinstance(t, FApp) and t.op in ("+", "-"):
        c1, k1 = _lin(t.args[0], cc, atoms)
        c2, k2 = _lin(t.args[1], cc, atoms)
        sign = 1 if t.op == "+" else -1
        out = dict(c1)
        for v, c in c2.items():
            out[v] = out.get(v, Fraction(0)) + sign * c
        return {v: c for v, c in out.items() if c}, k1 + sign * k2
    if isinstance(t, FApp) and t.op == "neg":
        c1, k1 = _lin(t.args[0], cc, atoms)
        return {v: -c for v, c in c1.items()}, -k1
    if isinstance(t, FApp) and t.op == "*":
        l, r = t.args
        lc, lk = _try_const(l, cc, atoms)
        if lc:
            c2, k2 = _lin(r, cc, atoms)
            return {v: lk * c for v, c in c2.items()}, lk * k2
        rc, rk = _try_const(r, cc, atoms)
        if rc:
            c1, k1 = _lin(l, cc, atoms)
            return {v: rk * c for v, c in c1.items()}, rk * k1
        raise _NonLinear()
    if isinstance(t, FApp) and t.op == "/":
        rc, rk = _try_const(t.args[1], cc, atoms)
        if rc and rk != 0:
            c1, k1 = _lin(t.args[0], cc, atoms)
            return {v: c / rk for v, c in c1.items()}, k1 / rk
        raise _NonLinear()
    # an opaque subterm: its congruence class is one arithmetic unknown
    rep = cc.find(cc.add(t))
    atoms[rep] = t
    return {rep: Fraction(1)}, Fraction(0)


def _try_const(t, cc, atoms):
    try:
        c, k = _lin(t, cc, atoms)
    except _NonLinear:
        return False, Fraction(0)
    if not c:
        return True, k
    return False, Fraction(0)


def _fm_unsat(rows: list) -> bool:
    """rows: (coeffs, const, strict) meaning sum + const >= 0 (or > 0).
    True iff the system is unsatisfiable over the rationals."""
    rows = [r for r in rows]
    while True:
        rows2 = []
        for coeffs, const, strict in rows:
            if not coeffs:
                if const < 0 or (strict and const == 0):
                    return True
            else:
                rows2.append((coeffs, const, strict))
        if not rows2:
            return False
        var = next(iter(rows2[0][0]))
        pos, neg, rest = [], [], []
        for coeffs, const, strict in rows2:
            c = coeffs.get(var, Fraction(0))
            if c > 0:
                pos.append((coeffs, const, strict))
            elif c < 0:
                neg.append((coeffs, const, strict))
            else:
                rest.append((coeffs, const, strict))
        new = rest
        for pc, pk, ps in pos:
            for nc, nk, ns in neg:
                a = pc[var]
                b = -nc[var]
                coeffs = {}
                for v, c in pc.items():
                    if v != var:
                        coeffs[v] = coeffs.get(v, Fraction(0)) + c / a
                for v, c in nc.items():
                    if v != var:
                        coeffs[v] = coeffs.get(v, Fraction(0)) + c / b
                coeffs = {v: c for v, c in coeffs.items() if c}
                new.append((coeffs, pk / a + nk / b, ps or ns))
        if len(new) > _FM_ROW_CAP:
            raise _NonLinear()
        if not pos or not neg:
            # unbounded on one side: rows mentioning the variable are always
            # satisfiable, so they drop out
            rows = rest
            continue
        rows = new


# ------------------------------------------------------------------ the prover


def _cube_unsat(cube: list, assumed: frozenset) -> Optional[bool]:
    """True: cube contradictory. False: cube has a rational model candidate.
    None: could not decide (nonlinear)."""
    cc = _Congruence()
    eqs, diseqs, cmps, preds = [], [], [], []
    for lit in cube:
        pos, atom = True, lit
        if isinstance(lit, FNot):
            pos, atom = False, lit.f
        if isinstance(atom, FBool):
            if atom.value != pos:
                return True
            continue
        if isinstance(atom, FPred):
            if atom.name in assumed and not pos:
                return True  # contradicts a scheme assumption
            preds.append((pos, atom))
            continue
        if isinstance(atom, FEq):
            (eqs if pos else diseqs).append(atom)
            continue
        if isinstance(atom, FCmp):
            cmps.append((pos, atom))
            continue
        raise AssertionError(atom)
    for a in eqs:
        cc.union(cc.add(a.l), cc.add(a.r))
    for a in diseqs:
        cc.add(a.l), cc.add(a.r)
    for _, a in cmps:
        cc.add(a.l), cc.add(a.r)
    # predicate conflicts on congruent arguments
    seen: dict = {}
    for pos, p in preds:
        sig = (p.name, tuple(cc.find(cc.add(a)) for a in p.args))
        if sig in seen and seen[sig] != pos:
            return True
        seen[sig] = pos
    # structural disequality conflicts
    for a in diseqs:
        if cc.find(cc.add(a.l)) == cc.find(cc.add(a.r)):
            return True
    # distinct ground literals merged into one class
    lits: dict = {}
    for key in list(cc.parent):
        if key.startswith("lit:"):
            rep = cc.find(key)
            if rep in lits and lits[rep] != key:
                return True
            lits[rep] = key
    # linear arithmetic over class representatives
    atoms: dict = {}
    rows = []
    try:
        for a in eqs:
            c1, k1 = _lin(a.l, cc, atoms)
            c2, k2 = _lin(a.r, cc, atoms)
            if _numericish(a.l) or _numericish(a.r) or _any_numeric(c1, k1, c2, k2):
                diff = _sub(c1, k1, c2, k2)
                rows.append((diff[0], diff[1], False))
                rows.append(({v: -c for v, c in diff[0].items()}, -diff[1], False))
        for a in diseqs:
            # handled by splitting below
            pass
        for pos, a in cmps:
            c1, k1 = _lin(a.l, cc, atoms)
            c2, k2 = _lin(a.r, cc, atoms)
            op = a.op if pos else {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}[a.op]
            if op in (">", ">="):
                diff = _sub(c1, k1, c2, k2)
            else:
                diff = _sub(c2, k2, c1, k1)
            rows.append((diff[0], diff[1], op in ("<", ">")))
        numeric_diseqs = []
        for a in diseqs:
            c1, k1 = _lin(a.l, cc, atoms)
            c2, k2 = _lin(a.r, cc, atoms)
            if _any_numeric(c1, k1, c2, k2):
                numeric_diseqs.append(_sub(c1, k1, c2, k2))
        # each numeric disequality splits into < or >
        for signs in itertools.product((1, -1), repeat=min(len(numeric_diseqs), 8)):
            extra = []
            for s, (coeffs, const) in zip(signs, numeric_diseqs):
                extra.append(({v: s * c for v, c in coeffs.items()}, s * const, True))
            if not _fm_unsat(rows + extra):
                return False
        if numeric_diseqs:
            return True
        return _fm_unsat(rows)
    except _NonLinear:
        return None


def _numericish(t) -> bool:
    return isinstance(t, FLit) and isinstance(t.value, (int, Fraction)) \
        and not isinstance(t.value, bool)


def _any_numeric(c1, k1, c2, k2) -> bool:
    return True  # treat all equalities as rational constraints; sound


def _sub(c1, k1, c2, k2):
    out = dict(c1)
    for v, c in c2.items():
        out[v] = out.get(v, Fraction(0)) - c
    return {v: c for v, c in out.items() if c}, k1 - k2


def _collect_vars(f, out: set):
    def t_walk(t):
        if isinstance(t, (FProg, FVar)):
            out.add(t)
        elif isinstance(t, FApp):
            if t.op == "select":
                out.add(None)  # heap term: model search unsupported
            for a in t.args:
                t_walk(a)

    if isinstance(f, (FEq,)):
        t_walk(f.l), t_walk(f.r)
    elif isinstance(f, FCmp):
        t_walk(f.l), t_walk(f.r)
    elif isinstance(f, FPred):
        out.add(None)
    elif isinstance(f, FNot):
        _collect_vars(f.f, out)
    elif isinstance(f, (FAnd, FOr, FImp)):
        _collect_vars(f.l, out), _collect_vars(f.r, out)
    elif isinstance(f, (FEx, FAll)):
        out.add(None)
    elif isinstance(f, FBool):
        pass
    else:
        raise AssertionError(f)


def _eval_closed(f, env: dict):
    from .fos import Domains, eval_fos
    from .fos import subst_formula

    sub = {}
    for var, val in env.items():
        key = ("prog", var.name) if isinstance(var, FProg) else ("var", var.name)
        sub[key] = FLit(val)
    g = subst_formula(f, sub)
    return eval_fos(g, None, {}, Domains({}, frozenset()))


_INT_DOMAIN = list(range(-3, 4))
_RAT_DOMAIN = _INT_DOMAIN + [Fraction(1, 2), Fraction(-1, 2),
                             Fraction(1, 3), Fraction(-1, 3)]


def find_model(f, domain: Optional[list] = None, cap_vars: int = 5,
               var_sorts: Optional[dict] = None):
    """Bounded counterexample search; None when the formula mentions heaps,
    predicates or quantifiers. A variable only takes non-integer values when
    its sort is known to be rational: a fractional witness for an integer
    variable would be a wrong refutation."""
    vs: set = set()
    _collect_vars(f, vs)
    if None in vs or len(vs) > cap_vars:
        return None
    vs = sorted(vs, key=lambda v: v.name)
    sorts = var_sorts or {}

    def dom_for(v) -> list:
        if domain is not None:
            return domain
        if sorts.get(v.name) == "Rat":
            return _RAT_DOMAIN
        return _INT_DOMAIN

    for combo in itertools.product(*(dom_for(v) for v in vs)):
        env = dict(zip(vs, combo))
        try:
            if _eval_closed(f, env) is True:
                return {v.name: x for v, x in env.items()}
        except Exception:
            return None
    return None


_ANON_COUNTER = [0]


def _defuse_anon(t):
    """Replace anon(h) subterms by fresh uninterpreted heap constants."""
    if isinstance(t, FApp):
        if t.op == "anon":
            _ANON_COUNTER[0] += 1
            return FVar(f"_anonheap{_ANON_COUNTER[0]}")
        return FApp(t.op, tuple(_defuse_anon(a) for a in t.args))
    return t


def _defuse_anon_formula(f):
    if isinstance(f, FBool):
        return f
    if isinstance(f, FPred):
        return FPred(f.name, tuple(_defuse_anon(a) for a in f.args))
    if isinstance(f, FEq):
        return FEq(_defuse_anon(f.l), _defuse_anon(f.r))
    if isinstance(f, FCmp):
        return FCmp(f.op, _defuse_anon(f.l), _defuse_anon(f.r))
    if isinstance(f, FNot):
        return FNot(_defuse_anon_formula(f.f))
    if isinstance(f, (FAnd, FOr, FImp)):
        return type(f)(_defuse_anon_formula(f.l), _defuse_anon_formula(f.r))
    if isinstance(f, (FEx, FAll)):
        return type(f)(f.var, f.sort, _defuse_anon_formula(f.body))
    raise AssertionError(f)


def discharge_vc(gamma, phi, assumed: frozenset = frozenset(),
                 model_domain: Optional[list] = None,
                 var_sorts: Optional[dict] = None) -> VCResult:
    """Is ``gamma |- phi`` valid? Conservative: valid/invalid answers are
    definite, everything else is unknown. ``var_sorts`` restricts the
    counterexample search to sort-respecting values."""
    gamma = [_defuse_anon_formula(g) for g in gamma]
    phi = _defuse_anon_formula(phi)
    neg = FNot(phi)
    whole = neg
    for g in gamma:
        whole = FAnd(g, whole)
    for name in sorted(assumed):
        whole = FAnd(FPred(name), whole)
    try:
        cubes = _dnf(_nnf(whole, True))
    except _Quantified:
        return VCResult("unknown", reason="quantified or oversized condition")
    undecided = False
    for cube in cubes:
        r = _cube_unsat(cube, assumed)
        if r is True:
            continue
        undecided = True
        break
    if not undecided:
        return VCResult("valid")
    model = find_model(whole, model_domain, var_sorts=var_sorts)
    if model is not None:
        return VCResult("invalid", model=model)
    return VCResult("unknown", reason="not refuted; no small counterexample")


def vc_to_smtlib(gamma, phi, name: str = "vc") -> str:
    """SMT-LIB v2 rendering of a verification condition for external replay."""
    decls: dict = {}
    sorts = {"Heap", "Val"}

    def walk_t(t):
        if isinstance(t, (FProg, FVar)):
            nm = t.name if isinstance(t, FVar) else f"p_{t.name}"
            decls.setdefault(nm, "Val" if nm != "p_heap" else "Heap")
        elif isinstance(t, FField):
            decls.setdefault(f"fld_{t.name}", "Field")
            sorts.add("Field")
        elif isinstance(t, FApp):
            for a in t.args:
                walk_t(a)

    def walk_f(f):
        if isinstance(f, (FEq,)):
            walk_t(f.l), walk_t(f.r)
        elif isinstance(f, FCmp):
            walk_t(f.l), walk_t(f.r)
        elif isinstance(f, FPred):
            decls.setdefault(f"pred_{f.name}", "Bool")
            for a in f.args:
                walk_t(a)
        elif isinstance(f, FNot):
            walk_f(f.f)
        elif isinstance(f, (FAnd, FOr, FImp)):
            walk_f(f.l), walk_f(f.r)
        elif isinstance(f, (FEx, FAll)):
            walk_f(f.body)

    def t2s(t) -> str:
        if isinstance(t, FLit):
            if isinstance(t.value, bool):
                return "(val_bool true)" if t.value else "(val_bool false)"
            if isinstance(t.value, int):
                return f"(val_int {t.value})" if t.value >= 0 \
                    else f"(val_int (- {-t.value}))"
            if isinstance(t.value, Fraction):
                return f"(val_rat (/ {t.value.numerator} {t.value.denominator}))"
            return f"(val_other \"{t.value!r}\")"
        if isinstance(t, FVar):
            return t.name
        if isinstance(t, FProg):
            return f"p_{t.name}"
        if isinstance(t, FField):
            return f"fld_{t.name}"
        if isinstance(t, FApp):
            op = {"+": "val_add", "-": "val_sub", "*": "val_mul", "/": "val_div",
                  "select": "hselect", "store": "hstore", "len": "val_len",
                  "hd": "val_hd", "tl": "val_tl", "Cons": "val_cons",
                  "neg": "val_neg", "!": "val_not", "&&": "val_and",
                  "||": "val_or", "==": "val_eqv", "!=": "val_neqv",
                  "<": "val_lt", "<=": "val_le", ">": "val_gt", ">=": "val_ge",
                  "index": "val_index", "anon": "hanon"}.get(t.op, t.op)
            if not t.args:
                return op
            return "(" + op + " " + " ".join(t2s(a) for a in t.args) + ")"
        raise AssertionError(t)

    def f2s(f) -> str:
        if isinstance(f, FBool):
            return "true" if f.value else "false"
        if isinstance(f, FPred):
            return f"pred_{f.name}" if not f.args else \
                "(pred_" + f.name + " " + " ".join(t2s(a) for a in f.args) + ")"
        if isinstance(f, FEq):
            return f"(= {t2s(f.l)} {t2s(f.r)})"
        if isinstance(f, FCmp):
            op = {"<": "val_lt", "<=": "val_le", ">": "val_gt", ">=": "val_ge"}[f.op]
            return f"(= ({op} {t2s(f.l)} {t2s(f.r)}) (val_bool true))"
        if isinstance(f, FNot):
            return f"(not {f2s(f.f)})"
        if isinstance(f, FAnd):
            return f"(and {f2s(f.l)} {f2s(f.r)})"
        if isinstance(f, FOr):
            return f"(or {f2s(f.l)} {f2s(f.r)})"
        if isinstance(f, FImp):
            return f"(=> {f2s(f.l)} {f2s(f.r)})"
        if isinstance(f, FEx):
            return f"(exists (({f.var} Val)) {f2s(f.body)})"
        if isinstance(f, FAll):
            return f"(forall (({f.var} Val)) {f2s(f.body)})"
        raise AssertionError(f)

    for g in gamma:
        walk_f(g)
    walk_f(phi)
    out = [f"; {name}", "(set-logic ALL)"]
    for s in sorted(sorts):
        out.append(f"(declare-sort {s} 0)")
    out += [
        "(declare-fun val_int (Int) Val)", "(declare-fun val_rat (Real) Val)",
        "(declare-fun val_bool (Bool) Val)",
        "(declare-fun val_add (Val Val) Val)", "(declare-fun val_sub (Val Val) Val)",
        "(declare-fun val_mul (Val Val) Val)", "(declare-fun val_div (Val Val) Val)",
        "(declare-fun val_neg (Val) Val)", "(declare-fun val_not (Val) Val)",
        "(declare-fun val_and (Val Val) Val)", "(declare-fun val_or (Val Val) Val)",
        "(declare-fun val_lt (Val Val) Val)", "(declare-fun val_le (Val Val) Val)",
        "(declare-fun val_gt (Val Val) Val)", "(declare-fun val_ge (Val Val) Val)",
        "(declare-fun val_eqv (Val Val) Val)", "(declare-fun val_neqv (Val Val) Val)",
        "(declare-fun val_len (Val) Val)", "(declare-fun val_hd (Val) Val)",
        "(declare-fun val_tl (Val) Val)", "(declare-fun val_cons (Val Val) Val)",
        "(declare-fun val_index (Val Val) Val)",
    ]
    if "Field" in sorts:
        out += ["(declare-fun hselect (Heap Field) Val)",
                "(declare-fun hstore (Heap Field Val) Heap)",
                "(declare-fun hanon (Heap) Heap)",
                "(assert (forall ((h Heap) (f Field) (v Val))"
                " (= (hselect (hstore h f v) f) v)))"]
    for nm, sort in sorted(decls.items()):
        if nm.startswith("pred_"):
            out.append(f"(declare-fun {nm} () Bool)")
        else:
            out.append(f"(declare-fun {nm} () {sort})")
    for g in gamma:
        out.append(f"(assert {f2s(g)})")
    out.append(f"(assert (not {f2s(phi)}))")
    out.append("(check-sat)")
    return "\n".join(out) + "\n"
