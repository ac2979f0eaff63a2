"""Method-type skeleton inference and contract/invariant weaving.

The skeleton maps every call to a call action, branching to an active
choice, loops to repetition, termination to a terminating action and each
read to a passive choice over all methods whose first branch continues the
protocol; every condition is trivially true. Weaving strengthens the receive
and terminating actions with contract and invariant and call actions with
the callees' receive conditions."""

from __future__ import annotations

from typing import Optional

from . import ast
from .ast import Assign, Await, CallStmt, Get, If, Return, Skip, While, stmt_list
from .btypes import (
    CallAct, ChoiceT, DownAct, PassiveT, Protocol, SeqT, SkipT, StarT,
    normalize, seq_of,
)
from .fos import FAnd, FBool, fand
from .parser import CaoError


def infer_skeleton(program: ast.Program, method: str) -> Protocol:
    cls, md = program.resolve_method(method)
    refcls = dict(cls.refparams)
    all_methods = tuple(sorted(program.qualified_methods()))

    def infer_seq(stmts: list):
        acts = []
        for i, st in enumerate(stmts):
            if isinstance(st, (Skip, Assign)):
                continue
            if isinstance(st, CallStmt):
                acts.append(CallAct(st.callee, f"{refcls[st.callee]}.{st.method}",
                                    FBool(True)))
            elif isinstance(st, If):
                then = infer_seq(stmt_list(st.then))
                els = infer_seq(stmt_list(st.els)) if st.els is not None else SkipT()
                acts.append(ChoiceT((then, els)))
            elif isinstance(st, While):
                acts.append(StarT(infer_seq(stmt_list(st.body))))
            elif isinstance(st, Get):
                # the rest of the protocol continues inside the first branch
                rest = infer_seq(stmts[i + 1:])
                acts.append(PassiveT(all_methods, FBool(True), rest, SkipT()))
                return normalize(seq_of(acts))
            elif isinstance(st, Return):
                break
            elif isinstance(st, Await):
                raise CaoError(f"{method}: method types do not cover suspension")
            else:
                raise AssertionError(st)
        return normalize(seq_of(acts))

    body = stmt_list(md.body)
    if not body or not isinstance(body[-1], Return):
        raise CaoError(f"{method}: body must end in return")
    skel = infer_seq(body[:-1])
    full = normalize(seq_of([skel, DownAct(FBool(True))]))
    return Protocol(method, FBool(True), full)


def _weave(L, post, inv, scheme_pres: dict):
    if isinstance(L, DownAct):
        return DownAct(fand(L.phi, post, inv))
    if isinstance(L, CallAct):
        pre = scheme_pres.get(L.method, FBool(True))
        return CallAct(L.role, L.method, fand(L.phi, pre))
    if isinstance(L, SeqT):
        return SeqT(_weave(L.l, post, inv, scheme_pres),
                    _weave(L.r, post, inv, scheme_pres))
    if isinstance(L, StarT):
        return StarT(_weave(L.body, post, inv, scheme_pres))
    if isinstance(L, ChoiceT):
        return ChoiceT(tuple(_weave(b, post, inv, scheme_pres) for b in L.branches))
    if isinstance(L, PassiveT):
        return PassiveT(L.methods, L.phi,
                        _weave(L.left, post, inv, scheme_pres),
                        _weave(L.right, post, inv, scheme_pres))
    return L


def weave_contract(proto: Protocol, pre, post, classinv,
                   is_constructor: bool = False,
                   scheme_pres: Optional[dict] = None) -> Protocol:
    """Add contract and object invariant: the precondition joins the receive
    action, the postcondition and invariant join every terminating action;
    the constructor only establishes the invariant on termination."""
    inv = classinv if classinv is not None else FBool(True)
    receive = fand(proto.pre, pre) if is_constructor \
        else fand(proto.pre, pre, inv)
    body = _weave(proto.body, post, inv, scheme_pres or {})
    return Protocol(proto.method, receive, normalize(body))
