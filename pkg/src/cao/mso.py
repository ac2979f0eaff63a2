"""Monadic second-order trace logic: event/state atoms over positions of a
local trace, first- and second-order quantifiers, and relativization.

Positions are 1-indexed over the whole history; event and state atoms are
false out of range or on the wrong element kind. Subset quantification is
exhaustive up to a cardinality cap, beyond which the verdict is unknown.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from .events import (
    CondEv, CondREv, Diamond, FutEv, FutREv, InvEv, InvREv, NoEv, SuspEv,
    SuspREv,
)
from .fos import (
    CaoLogicError, Domains, basic_domains, eval_fos, k_and, k_imp, k_not,
    k_or,
)
from .traces import LocalTrace, ObjectState
from .values import NEVER, FutId, ObjRef


# -------------------------------------------------------------------- terms


@dataclass(frozen=True)
class MVar:
    name: str


@dataclass(frozen=True)
class MLit:
    value: Any


@dataclass(frozen=True)
class MApp:
    op: str  # + - last singleton
    args: tuple


class _Wild:
    def __repr__(self) -> str:
        return "_"


WILD = _Wild()

_EV_ARITY = {
    "invEv": 5, "invREv": 4, "futEv": 4, "futREv": 5,
    "condEv": 4, "condREv": 4, "suspEv": 4, "suspREv": 4,
    "noEv": 0, "diamond": 0,
}

_EV_CLASS = {
    "invEv": InvEv, "invREv": InvREv, "futEv": FutEv, "futREv": FutREv,
    "condEv": CondEv, "condREv": CondREv, "suspEv": SuspEv,
    "suspREv": SuspREv, "noEv": NoEv, "diamond": Diamond,
}


@dataclass(frozen=True)
class EvPat:
    """An event term: kind plus one slot per payload position. A slot is a
    term, the wildcard, or (for argument lists) a tuple of slots."""

    kind: str
    slots: tuple = ()

    def __post_init__(self):
        if self.kind not in _EV_ARITY:
            raise CaoLogicError(f"unknown event kind {self.kind!r}")
        if len(self.slots) != _EV_ARITY[self.kind]:
            raise CaoLogicError(
                f"{self.kind} takes {_EV_ARITY[self.kind]} arguments")


# ----------------------------------------------------------------- formulas


@dataclass(frozen=True)
class MBool:
    value: bool


@dataclass(frozen=True)
class MPred:
    name: str  # isEvent | isState | is<Kind> | declared assumption
    args: tuple = ()


@dataclass(frozen=True)
class MEq:
    l: Any
    r: Any


@dataclass(frozen=True)
class MCmp:
    op: str
    l: Any
    r: Any


@dataclass(frozen=True)
class MSub:
    l: Any
    r: Any


@dataclass(frozen=True)
class MNot:
    f: Any


@dataclass(frozen=True)
class MAnd:
    l: Any
    r: Any


@dataclass(frozen=True)
class MOr:
    l: Any
    r: Any


@dataclass(frozen=True)
class MImp:
    l: Any
    r: Any


@dataclass(frozen=True)
class MEx:
    var: str
    sort: str
    body: Any


@dataclass(frozen=True)
class MAll:
    var: str
    sort: str
    body: Any


@dataclass(frozen=True)
class MEx2:
    var: str
    sort: str
    body: Any


@dataclass(frozen=True)
class MAll2:
    var: str
    sort: str
    body: Any


@dataclass(frozen=True)
class MEvAt:
    """[t] = evt"""

    pos: Any
    pat: EvPat


@dataclass(frozen=True)
class MStAt:
    """[t] |- phi"""

    pos: Any
    phi: Any


M_TRUE = MBool(True)


def mand(*fs):
    out = None
    for f in fs:
        if f == M_TRUE:
            continue
        out = f if out is None else MAnd(out, f)
    return M_TRUE if out is None else out


def mor(*fs):
    out = None
    for f in fs:
        out = f if out is None else MOr(out, f)
    return MBool(False) if out is None else out


# ------------------------------------------------------------- substitution


def subst_mterm(t, sub: dict):
    if isinstance(t, MVar) and t.name in sub:
        return sub[t.name]
    if isinstance(t, MApp):
        return MApp(t.op, tuple(subst_mterm(a, sub) for a in t.args))
    return t


def _subst_slot(s, sub):
    if s is WILD:
        return s
    if isinstance(s, tuple):
        return tuple(_subst_slot(x, sub) for x in s)
    return subst_mterm(s, sub)


def subst_mso(f, sub: dict):
    if isinstance(f, MBool):
        return f
    if isinstance(f, MPred):
        return MPred(f.name, tuple(subst_mterm(a, sub) for a in f.args))
    if isinstance(f, (MEq, MCmp, MSub)):
        if isinstance(f, MCmp):
            return MCmp(f.op, subst_mterm(f.l, sub), subst_mterm(f.r, sub))
        return type(f)(subst_mterm(f.l, sub), subst_mterm(f.r, sub))
    if isinstance(f, MNot):
        return MNot(subst_mso(f.f, sub))
    if isinstance(f, (MAnd, MOr, MImp)):
        return type(f)(subst_mso(f.l, sub), subst_mso(f.r, sub))
    if isinstance(f, (MEx, MAll, MEx2, MAll2)):
        inner = {k: v for k, v in sub.items() if k != f.var}
        return type(f)(f.var, f.sort, subst_mso(f.body, inner))
    if isinstance(f, MEvAt):
        return MEvAt(subst_mterm(f.pos, sub),
                     EvPat(f.pat.kind, tuple(_subst_slot(s, sub) for s in f.pat.slots)))
    if isinstance(f, MStAt):
        return MStAt(subst_mterm(f.pos, sub), f.phi)
    raise AssertionError(f)


# ------------------------------------------------------------ relativization


def relativize(psi, sort: str, guard_var: str, guard) -> Any:
    """Syntactically restrict every quantifier of the given sort by the guard
    formula (with its one free variable renamed to the bound one). Atoms are
    left unchanged."""

    def g(var: str):
        return subst_mso(guard, {guard_var: MVar(var)})

    def go(f):
        if isinstance(f, (MBool, MPred, MEq, MCmp, MSub, MEvAt, MStAt)):
            return f
        if isinstance(f, MNot):
            return MNot(go(f.f))
        if isinstance(f, (MAnd, MOr, MImp)):
            return type(f)(go(f.l), go(f.r))
        if isinstance(f, MEx):
            if f.sort == sort:
                return MEx(f.var, f.sort, MAnd(g(f.var), go(f.body)))
            return MEx(f.var, f.sort, go(f.body))
        if isinstance(f, MAll):
            if f.sort == sort:
                return MAll(f.var, f.sort, MImp(g(f.var), go(f.body)))
            return MAll(f.var, f.sort, go(f.body))
        if isinstance(f, (MEx2, MAll2)):
            body = go(f.body)
            if f.sort == sort:
                x = f"{f.var}_el"
                member = MAll(x, sort, MImp(MSub(MApp("singleton", (MVar(x),)),
                                                 MVar(f.var)), g(x)))
                if isinstance(f, MEx2):
                    return MEx2(f.var, f.sort, MAnd(member, body))
                return MAll2(f.var, f.sort, MImp(member, body))
            return type(f)(f.var, f.sort, body)
        raise AssertionError(f)

    return go(psi)


# ------------------------------------------------------------------- domains


def payload_values(theta: LocalTrace) -> set:
    out: set = set()
    for el in theta.hs:
        if isinstance(el, ObjectState):
            for _, v in el.sigma.items():
                out.add(v)
            for _, v in el.rho.items():
                out.add(v)
        elif not isinstance(el, Diamond):
            from .events import event_payload

            for x in event_payload(el):
                if isinstance(x, tuple):
                    out.add(x)
                    out.update(x)
                elif x is not None and not isinstance(x, str):
                    out.add(x)
    return out


def trace_domains(theta: LocalTrace, program=None, halo: int = 8) -> Domains:
    vals = payload_values(theta)
    base = basic_domains([v for v in vals if isinstance(v, int)], halo)
    futs = sorted({v for v in vals if isinstance(v, FutId)}, key=lambda f: f.id)
    objs = {v.name for v in vals if isinstance(v, ObjRef)}
    methods: set = set()
    exprs: set = set()
    for el in theta.hs:
        if isinstance(el, (InvEv, InvREv, FutEv, FutREv)) and el.method:
            methods.add(el.method)
        if isinstance(el, (CondEv, CondREv)):
            exprs.add(el.guard_src)
    if program is not None:
        methods |= set(program.qualified_methods())
        objs |= {cr.var for cr in program.main.creations}
    carriers = dict(base.carriers)
    # carriers stay non-empty so a vacuous prenex existential cannot fail;
    # the pads never equal a real payload
    carriers.update({
        "I": list(range(1, len(theta.hs) + 1)),
        "Fut": futs + [NEVER],
        "O": [ObjRef(n) for n in sorted(objs)] or [ObjRef("__none")],
        "M": sorted(methods) or ["__none"],
        "Expr": sorted(exprs) or [""],
        "AnyExact": sorted(vals, key=repr) or [0],
    })
    return Domains(carriers, base.hedged)


# --------------------------------------------------------------- evaluation


def _free_slots(slots):
    for s in slots:
        if isinstance(s, tuple):
            yield from _free_slots(s)
        elif s is not WILD:
            yield s


def free_vars(f, cache: dict) -> tuple:
    """Sorted tuple of free variable names (memoized by node identity)."""
    key = id(f)
    if key in cache:
        return cache[key]

    def term_vars(t):
        if isinstance(t, MVar):
            return frozenset((t.name,))
        if isinstance(t, MApp):
            out: frozenset = frozenset()
            for a in t.args:
                out |= term_vars(a)
            return out
        return frozenset()

    if isinstance(f, (MBool,)):
        out = frozenset()
    elif isinstance(f, MPred):
        out = frozenset()
        for a in f.args:
            out |= term_vars(a)
    elif isinstance(f, (MEq, MCmp, MSub)):
        out = term_vars(f.l) | term_vars(f.r)
    elif isinstance(f, MNot):
        out = frozenset(free_vars(f.f, cache))
    elif isinstance(f, (MAnd, MOr, MImp)):
        out = frozenset(free_vars(f.l, cache)) | frozenset(free_vars(f.r, cache))
    elif isinstance(f, (MEx, MAll, MEx2, MAll2)):
        out = frozenset(free_vars(f.body, cache)) - frozenset((f.var,))
    elif isinstance(f, MEvAt):
        out = term_vars(f.pos)
        for s in _free_slots(f.pat.slots):
            out |= term_vars(s)
    elif isinstance(f, MStAt):
        out = term_vars(f.pos) | _fos_logical_vars(f.phi)
    else:
        raise AssertionError(f)
    out = tuple(sorted(out))
    cache[key] = out
    return out


def _fos_logical_vars(phi) -> frozenset:
    from . import fos as F

    if isinstance(phi, F.FBool):
        return frozenset()

    def tv(t):
        if isinstance(t, F.FVar):
            return frozenset((t.name,))
        if isinstance(t, F.FApp):
            out: frozenset = frozenset()
            for a in t.args:
                out |= tv(a)
            return out
        return frozenset()

    if isinstance(phi, F.FPred):
        out: frozenset = frozenset()
        for a in phi.args:
            out |= tv(a)
        return out
    if isinstance(phi, (F.FEq, F.FCmp)):
        return tv(phi.l) | tv(phi.r)
    if isinstance(phi, F.FNot):
        return _fos_logical_vars(phi.f)
    if isinstance(phi, (F.FAnd, F.FOr, F.FImp)):
        return _fos_logical_vars(phi.l) | _fos_logical_vars(phi.r)
    if isinstance(phi, (F.FEx, F.FAll)):
        return _fos_logical_vars(phi.body) - frozenset((phi.var,))
    raise AssertionError(phi)


class MsoEval:
    """Evaluator for one (trace, domains) pair; verdicts are cached per
    subformula and restricted assignment, which keeps subset quantification
    tractable."""

    def __init__(self, theta: LocalTrace, domains: Optional[Domains] = None,
                 assumed: frozenset = frozenset(), subset_cap: int = 16,
                 program=None, halo: int = 8):
        self.theta = theta
        self.domains = domains or trace_domains(theta, program, halo)
        self.assumed = assumed
        self.subset_cap = subset_cap
        self._cache: dict = {}
        self._fv: dict = {}
        self.approx: list = []  # hedged sorts a verdict depended on

    # terms

    def term(self, t, beta: dict):
        if isinstance(t, MLit):
            return t.value
        if isinstance(t, MVar):
            if t.name not in beta:
                raise CaoLogicError(f"unbound variable {t.name!r}")
            return beta[t.name]
        if isinstance(t, MApp):
            if t.op == "last":
                return len(self.theta.hs)
            args = [self.term(a, beta) for a in t.args]
            if t.op == "singleton":
                return frozenset((args[0],))
            if t.op == "+":
                return args[0] + args[1]
            if t.op == "-":
                return args[0] - args[1]
            raise CaoLogicError(f"unknown position function {t.op!r}")
        raise AssertionError(t)

    def _element(self, n):
        if not isinstance(n, int) or not 1 <= n <= len(self.theta.hs):
            return None
        return self.theta.hs[n - 1]

    def _match_event(self, el, pat: EvPat, beta) -> bool:
        cls = _EV_CLASS[pat.kind]
        if not isinstance(el, cls):
            return False
        from .events import event_payload

        payload = event_payload(el)
        for slot, actual in zip(pat.slots, payload):
            if slot is WILD:
                continue
            if isinstance(slot, tuple):
                if not isinstance(actual, tuple) or len(slot) != len(actual):
                    return False
                for s2, a2 in zip(slot, actual):
                    if s2 is WILD:
                        continue
                    if self.term(s2, beta) != a2:
                        return False
                continue
            if self.term(slot, beta) != actual:
                return False
        return True

    # formulas

    def eval(self, f, beta: Optional[dict] = None):
        return self._eval(f, beta or {})

    def _eval(self, f, beta: dict):
        fv = free_vars(f, self._fv)
        key = (id(f),) + tuple(beta.get(v) for v in fv)
        if key in self._cache:
            return self._cache[key]
        r = self._eval_raw(f, beta)
        self._cache[key] = r
        return r

    def _eval_raw(self, f, beta: dict):
        if isinstance(f, MBool):
            return f.value
        if isinstance(f, MPred):
            if f.name in self.assumed:
                return True
            if f.name in ("isEvent", "isState") or f.name.startswith("is"):
                el = self._element(self.term(f.args[0], beta))
                if f.name == "isEvent":
                    # the marker counts as an event for this predicate
                    return el is not None and not isinstance(el, ObjectState)
                if f.name == "isState":
                    return isinstance(el, ObjectState)
                kind = f.name[2].lower() + f.name[3:]
                if kind in _EV_CLASS:
                    return el is not None and isinstance(el, _EV_CLASS[kind])
            raise CaoLogicError(f"unknown predicate {f.name!r}")
        if isinstance(f, MEq):
            return self.term(f.l, beta) == self.term(f.r, beta)
        if isinstance(f, MCmp):
            l, r = self.term(f.l, beta), self.term(f.r, beta)
            try:
                return {"<": l < r, "<=": l <= r, ">": l > r, ">=": l >= r}[f.op]
            except TypeError:
                return None
        if isinstance(f, MSub):
            l, r = self.term(f.l, beta), self.term(f.r, beta)
            if not isinstance(l, frozenset) or not isinstance(r, frozenset):
                raise CaoLogicError("subset needs set-valued terms")
            return l <= r
        if isinstance(f, MNot):
            return k_not(self._eval(f.f, beta))
        if isinstance(f, MAnd):
            l = self._eval(f.l, beta)
            if l is False:
                return False
            return k_and(l, self._eval(f.r, beta))
        if isinstance(f, MOr):
            l = self._eval(f.l, beta)
            if l is True:
                return True
            return k_or(l, self._eval(f.r, beta))
        if isinstance(f, MImp):
            l = self._eval(f.l, beta)
            if l is False:
                return True
            return k_imp(l, self._eval(f.r, beta))
        if isinstance(f, MEvAt):
            el = self._element(self.term(f.pos, beta))
            if el is None or isinstance(el, ObjectState):
                return False
            return self._match_event(el, f.pat, beta)
        if isinstance(f, MStAt):
            el = self._element(self.term(f.pos, beta))
            if el is None or not isinstance(el, ObjectState):
                return False
            return eval_fos(f.phi, el, beta, self.domains, self.assumed,
                            self.approx)
        if isinstance(f, (MEx, MAll)):
            carrier = self.domains.carrier(f.sort)
            hedged = f.sort in self.domains.hedged
            unknown = False
            for v in carrier:
                b2 = dict(beta)
                b2[f.var] = v
                r = self._eval(f.body, b2)
                if isinstance(f, MEx) and r is True:
                    return True
                if isinstance(f, MAll) and r is False:
                    return False
                if r is None:
                    unknown = True
            if unknown:
                return None
            if hedged:
                self.approx.append(f.sort)
            return False if isinstance(f, MEx) else True
        if isinstance(f, (MEx2, MAll2)):
            carrier = self.domains.carrier(f.sort)
            if len(carrier) > self.subset_cap:
                return None
            unknown = False
            n = len(carrier)
            for mask in range(1 << n):
                sub = frozenset(carrier[i] for i in range(n) if mask >> i & 1)
                b2 = dict(beta)
                b2[f.var] = sub
                r = self._eval(f.body, b2)
                if isinstance(f, MEx2) and r is True:
                    return True
                if isinstance(f, MAll2) and r is False:
                    return False
                if r is None:
                    unknown = True
            if unknown:
                return None
            return False if isinstance(f, MEx2) else True
        raise AssertionError(f)


def eval_mso(psi, theta: LocalTrace, beta: Optional[dict] = None,
             domains: Optional[Domains] = None, subset_cap: int = 16,
             assumed: frozenset = frozenset(), program=None, halo: int = 8):
    """Evaluate a trace formula over a concrete local trace; None = unknown."""
    ev = MsoEval(theta, domains, assumed, subset_cap, program, halo)
    return ev.eval(psi, beta)
