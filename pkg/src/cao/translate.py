"""Trace-formula translations of the behavioral specifications: state
postconditions, points-to sets and method types."""

from __future__ import annotations

from typing import Any, Optional

from . import ast
from .btypes import CallAct, ChoiceT, DownAct, PassiveT, Protocol, SeqT, SkipT, StarT
from .fos import (
    CaoLogicError, FApp, FBool, FEq, FField, FProg, FVar,
    formula_mentions_prog, subst_formula,
)
from .mso import (
    EvPat, M_TRUE, MAll, MAnd, MApp, MBool, MCmp, MEq, MEvAt, MEx, MEx2,
    MImp, MLit, MNot, MOr, MPred, MStAt, MSub, MVar, WILD, mand, mor,
    relativize,
)

_LAST = MApp("last", ())


def alpha_pst(phi) -> Any:
    """A state postcondition as a trace formula over the final state; a
    mentioned ``result`` is bound to the resolving event's payload."""
    if formula_mentions_prog(phi, "result"):
        v = FVar("_res")
        body = subst_formula(phi, {("prog", "result"): v})
        ev = MEvAt(MApp("-", (_LAST, MLit(1))), EvPat("futEv", (WILD, WILD, WILD, MVar("_res"))))
        return MEx("_res", "AnyExact", MAnd(ev, MStAt(_LAST, body)))
    return MStAt(_LAST, phi)


def alpha_p2(methods) -> Any:
    """The next statement reads a future resolved by one of the methods.
    The read event sits at position 2 (position 1 is always a state)."""
    pat = EvPat("futREv", (MVar("_X"), MVar("_f"), MVar("_m"), MVar("_v"), WILD))
    disj = mor(*(MEq(MVar("_m"), MLit(m)) for m in sorted(methods))) \
        if methods else MBool(False)
    body = MAnd(MEvAt(MLit(2), pat), disj)
    out = MEx("_v", "AnyExact", body)
    out = MEx("_m", "M", out)
    out = MEx("_f", "Fut", out)
    return MEx("_X", "O", out)


class _MetBuilder:
    def __init__(self, program: Optional[ast.Program]):
        self.program = program
        self.n = 0

    def fresh(self, base: str) -> str:
        self.n += 1
        return f"_{base}_{self.n}"

    def callee_params(self, method: str) -> Optional[list]:
        if self.program is None:
            return None
        try:
            _, md = self.program.resolve_method(method)
            return [n for n, _ in md.params]
        except KeyError:
            return None

    def only_noev_before(self, j: str, var: str) -> Any:
        """positions below j hold only noEv events (states pass)."""
        return MAll(var, "I", MImp(
            MCmp("<", MVar(var), MVar(j)),
            MImp(MPred("isEvent", (MVar(var),)), MEvAt(MVar(var), EvPat("noEv")))))

    def build(self, L) -> Any:
        if isinstance(L, SkipT):
            l = self.fresh("l")
            return MAll(l, "I", MOr(MEvAt(MVar(l), EvPat("noEv")),
                                    MStAt(MVar(l), FBool(True))))
        if isinstance(L, CallAct):
            # the unbound callee handle, future and payload quantify over the
            # whole action: every visible event is THE one call
            i = self.fresh("i")
            x, fv = self.fresh("x"), self.fresh("f")
            params = self.callee_params(L.method)
            argvars: list = []
            if params is None:
                if L.phi != FBool(True):
                    raise CaoLogicError(
                        f"call condition on {L.method} needs the program for "
                        f"parameter names")
                argslot = WILD  # arity unknown without the program
            else:
                argvars = [self.fresh("a") for _ in params]
                argslot = tuple(MVar(a) for a in argvars)
            pat = EvPat("invEv", (MVar(x), MVar(L.role), MVar(fv),
                                  MLit(L.method), argslot))
            phi = subst_formula(L.phi, {("prog", p): FVar(a)
                                        for p, a in zip(params or [], argvars)})
            body = MAnd(MEvAt(MVar(i), pat),
                        MStAt(MApp("-", (MVar(i), MLit(1))), phi))
            out = MAll(i, "I", MImp(
                MAnd(MPred("isEvent", (MVar(i),)),
                     MNot(MEvAt(MVar(i), EvPat("noEv")))), body))
            for a in reversed(argvars):
                out = MEx(a, "AnyExact", out)
            out = MEx(fv, "Fut", out)
            return MEx(x, "O", out)
        if isinstance(L, DownAct):
            i = self.fresh("i")
            x, fv, e = self.fresh("x"), self.fresh("f"), self.fresh("e")
            phi = subst_formula(L.phi, {("prog", "result"): FVar(e)})
            body = MAnd(
                MEvAt(MVar(i), EvPat("futEv", (MVar(x), MVar(fv), WILD, MVar(e)))),
                MStAt(MApp("-", (MVar(i), MLit(1))), phi))
            out = MAll(i, "I", MImp(
                MAnd(MPred("isEvent", (MVar(i),)),
                     MNot(MEvAt(MVar(i), EvPat("noEv")))), body))
            out = MEx(e, "AnyExact", out)
            out = MEx(fv, "Fut", out)
            return MEx(x, "O", out)
        if isinstance(L, ChoiceT):
            return mor(*(self.build(b) for b in L.branches))
        if isinstance(L, SeqT):
            i = self.fresh("i")
            n = self.fresh("n")
            left = relativize(self.build(L.l), "I", n,
                              MCmp("<=", MVar(n), MVar(i)))
            right = relativize(self.build(L.r), "I", n,
                               MCmp(">=", MVar(n), MVar(i)))
            return MEx(i, "I", MAnd(left, right))
        if isinstance(L, StarT):
            R = self.fresh("R")
            a, b, k = self.fresh("a"), self.fresh("b"), self.fresh("k")
            i1, i2, l = self.fresh("i1"), self.fresh("i2"), self.fresh("l")
            n = self.fresh("n")
            in_R = lambda v: MSub(MApp("singleton", (MVar(v),)), MVar(R))
            bounds = MAll(l, "I", MImp(in_R(l), MAnd(
                MCmp("<=", MVar(a), MVar(l)), MCmp("<=", MVar(l), MVar(b)))))
            padding = MAll(k, "I", MOr(
                MAnd(MCmp("<=", MVar(a), MVar(k)), MCmp("<=", MVar(k), MVar(b))),
                MImp(MPred("isEvent", (MVar(k),)), MEvAt(MVar(k), EvPat("noEv")))))
            seg = relativize(self.build(L.body), "I", n, MAnd(
                MCmp("<=", MVar(i1), MVar(n)), MCmp("<=", MVar(n), MVar(i2))))
            adjacent = MAll(l, "I", MImp(in_R(l), MOr(
                MCmp("<=", MVar(l), MVar(i1)), MCmp(">=", MVar(l), MVar(i2)))))
            pairs = MAll(i1, "I", MAll(i2, "I", MImp(
                mand(in_R(i1), in_R(i2), MCmp("<", MVar(i1), MVar(i2)), adjacent),
                seg)))
            body = mand(in_R(a), in_R(b), MCmp("<=", MVar(a), MVar(b)),
                        bounds, padding, pairs)
            return MEx2(R, "I", MEx(a, "I", MEx(b, "I", body)))
        if isinstance(L, PassiveT):
            j = self.fresh("j")
            e, m, l, n = self.fresh("e"), self.fresh("m"), self.fresh("l"), self.fresh("n")
            phi = subst_formula(L.phi, {("prog", "result"): FVar(e)})
            after = MApp("+", (MVar(j), MLit(1)))
            guard = MStAt(after, phi)
            left = relativize(self.build(L.left), "I", n,
                              MCmp(">=", MVar(n), after))
            right = relativize(self.build(L.right), "I", n,
                               MCmp(">=", MVar(n), after))
            disj = mor(*(MEq(MVar(m), MLit(x)) for x in L.methods))
            body = mand(
                self.only_noev_before(j, l),
                MEvAt(MVar(j), EvPat("futREv", (WILD, WILD, MVar(m), MVar(e), WILD))),
                disj,
                MImp(guard, left),
                MImp(MNot(guard), right),
            )
            body = MEx(e, "AnyExact", MEx(m, "M", body))
            return MEx(j, "I", body)
        raise AssertionError(L)


def alpha_met(L, roles: dict, program: Optional[ast.Program] = None) -> Any:
    """The trace formula of a method type under a role-to-field binding."""
    b = _MetBuilder(program)
    core = b.build(L)
    for role in sorted(roles, reverse=True):
        fieldname = roles[role]
        bind = MStAt(MLit(1), FEq(FVar(role),
                                  FApp("select", (FProg("heap"), FField(fieldname)))))
        core = MEx(role, "O", MAnd(bind, core))
    return core


def alpha_protocol(p: Protocol, roles: dict,
                   program: Optional[ast.Program] = None) -> Any:
    return alpha_met(p.body, roles, program)
