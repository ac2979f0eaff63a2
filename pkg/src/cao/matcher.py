"""Direct matcher for method types over concrete local traces.

Evaluates the same clauses as the trace-formula translation, but over
position ranges with memoized splits, so repetition is a polynomial tiling
search instead of a subset enumeration. Verdicts are three-valued; an
unknown only arises from unknowns in the embedded state formulas.
"""

from __future__ import annotations

from typing import Any, Optional

from .btypes import CallAct, ChoiceT, DownAct, PassiveT, SeqT, SkipT, StarT
from .events import FutEv, FutREv, InvEv, NoEv
from .fos import (
    CaoLogicError, Domains, FVar, FLit, eval_fos, k_and, k_imp, k_not, k_or,
    subst_formula,
)
from .localsem import LocalTrace
from .mso import trace_domains
from .traces import ObjectState


def slice_after_invrev(theta: LocalTrace) -> LocalTrace:
    """Drop the leading state and invocation reaction event, if present."""
    from .events import InvREv

    if len(theta.hs) >= 3 and isinstance(theta.hs[1], InvREv):
        return LocalTrace(theta.sc, theta.hs[2:])
    return theta


class _Matcher:
    def __init__(self, theta: LocalTrace, binding: dict, program,
                 domains: Optional[Domains], assumed: frozenset,
                 callee_params):
        self.theta = theta
        self.binding = binding  # role -> object value
        self.program = program
        self.domains = domains or trace_domains(theta, program)
        self.assumed = assumed
        self.callee_params = callee_params
        self.memo: dict = {}
        self.approx: list = []

    def state_at(self, pos: int) -> Optional[ObjectState]:
        if 1 <= pos <= len(self.theta.hs):
            el = self.theta.hs[pos - 1]
            if isinstance(el, ObjectState):
                return el
        return None

    def phi_at(self, pos: int, phi, beta: dict):
        st = self.state_at(pos)
        if st is None:
            return False
        return eval_fos(phi, st, beta, self.domains, self.assumed, self.approx)

    def events_in(self, lo: int, hi: int) -> list:
        """Non-state elements in the range that are not noEv (the marker
        counts: it refuses every action pattern)."""
        out = []
        for p in range(lo, hi + 1):
            el = self.theta.hs[p - 1]
            if isinstance(el, ObjectState) or isinstance(el, NoEv):
                continue
            out.append((p, el))
        return out

    def match(self, L, lo: int, hi: int):
        key = (id(L), lo, hi)
        if key in self.memo:
            return self.memo[key]
        self.memo[key] = None  # cycle guard; types are finite so unused
        r = self._match(L, lo, hi)
        self.memo[key] = r
        return r

    def _match(self, L, lo: int, hi: int):
        if isinstance(L, SkipT):
            return not self.events_in(lo, hi)
        if isinstance(L, CallAct):
            # one shared caller/future/payload across the action: all visible
            # events must be equal matching invocations
            want = self.binding.get(L.role)
            params = self.callee_params(L.method)
            out = True
            first = None
            for p, el in self.events_in(lo, hi):
                if not isinstance(el, InvEv) or el.method != L.method \
                        or el.callee != want:
                    return False
                # caller and future are bound once per action; the payload is
                # shared too when the signature pins its arity
                key = (el.caller, el.fut) + ((el.args,) if params is not None else ())
                if first is None:
                    first = key
                elif key != first:
                    return False
                sub = {("prog", n): FLit(v)
                       for n, v in zip(params or [], el.args)}
                out = k_and(out, self.phi_at(p - 1, subst_formula(L.phi, sub), {}))
                if out is False:
                    return False
            return out
        if isinstance(L, DownAct):
            out = True
            first = None
            for p, el in self.events_in(lo, hi):
                if not isinstance(el, FutEv):
                    return False
                key = (el.obj, el.fut, el.value)  # the resolver is wildcarded
                if first is None:
                    first = key
                elif key != first:
                    return False
                phi = subst_formula(L.phi, {("prog", "result"): FLit(el.value)})
                out = k_and(out, self.phi_at(p - 1, phi, {}))
                if out is False:
                    return False
            return out
        if isinstance(L, ChoiceT):
            out = False
            for b in L.branches:
                out = k_or(out, self.match(b, lo, hi))
                if out is True:
                    return True
            return out
        if isinstance(L, SeqT):
            out = False
            for i in range(lo, hi + 1):
                out = k_or(out, k_and(self.match(L.l, lo, i),
                                      self.match(L.r, i, hi)))
                if out is True:
                    return True
            return out
        if isinstance(L, StarT):
            out = False
            for a in range(lo, hi + 1):
                if self.events_in(lo, a - 1):
                    continue  # left padding must be noEv/states
                for b in range(a, hi + 1):
                    if self.events_in(b + 1, hi):
                        continue
                    out = k_or(out, self._tile(L.body, a, b, hi))
                    if out is True:
                        return True
            return out
        if isinstance(L, PassiveT):
            out = False
            for j in range(lo, hi + 1):
                el = self.theta.hs[j - 1] if j <= len(self.theta.hs) else None
                if not isinstance(el, FutREv):
                    continue
                if el.method not in L.methods:
                    continue
                if self.events_in(lo, j - 1):
                    continue  # only noEv before the read
                phi = subst_formula(L.phi, {("prog", "result"): FLit(el.value)})
                guard = self.phi_at(j + 1, phi, {})
                k = j + 1
                r = k_and(k_imp(guard, self.match(L.left, max(lo, k), hi)),
                          k_imp(k_not(guard), self.match(L.right, max(lo, k), hi)))
                out = k_or(out, r)
                if out is True:
                    return True
            return out
        raise AssertionError(L)

    def _tile(self, body, a: int, b: int, hi: int):
        """Zero or more back-to-back segments, each matching the body."""
        key = ("tile", id(body), a, b)
        if key in self.memo:
            return self.memo[key]
        if a == b:
            self.memo[key] = True
            return True
        out = False
        for m in range(a + 1, b + 1):
            out = k_or(out, k_and(self.match(body, a, m), self._tile(body, m, b, hi)))
            if out is True:
                break
        self.memo[key] = out
        return out


def match_trace(theta: LocalTrace, L, roles: dict, program=None,
                domains: Optional[Domains] = None,
                assumed: frozenset = frozenset()):
    """Does the concrete trace (sliced past its invocation reaction) realize
    the method type under the role binding? Three-valued."""
    if not theta.hs:
        return False
    st1 = theta.hs[0]
    if not isinstance(st1, ObjectState):
        raise CaoLogicError("a trace starts with a state")
    binding = {}
    for role, fieldname in roles.items():
        try:
            binding[role] = st1.rho[fieldname]
        except KeyError:
            return False

    def callee_params(method: str):
        if program is None:
            return None
        try:
            _, md = program.resolve_method(method)
            return [n for n, _ in md.params]
        except KeyError:
            return None

    m = _Matcher(theta, binding, program, domains, assumed, callee_params)
    return m.match(L, 1, len(theta.hs))
