"""Symbolic per-method trace semantics.

Expressions evaluate to symbolic expressions under an object state; ground
subterms fold, symbolic subterms block arithmetic. Statements denote finite
sets of local traces; loops are unrolled up to a configurable budget and
branches that still contain a loop at budget zero are dropped and flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

from . import ast
from .ast import (
    Assign, Await, Bin, BoolLit, Builtin, CallStmt, FieldAcc, Get, If, IntLit,
    NeverLit, NilLit, Return, Seq, Skip, Stmt, UnitLit, Un, Var, While,
    default_value, print_expr, stmt_list,
)
from .events import (
    CondEv, CondREv, DIAMOND, FutEv, FutREv, InvEv, InvREv, NO_EV, SuspEv,
    SuspREv,
)
from .symbolic import FreshGen, SymExpr, SymField, SymVal, mk_op
from .traces import LocalTrace, ObjectState, chop, singleton, trace
from .values import NEVER, UNIT, FMap


def eval_expr(e: ast.Expr, st: ObjectState) -> Optional[SymExpr]:
    """Evaluate a syntactic expression to a symbolic expression; None when
    the evaluation is undefined (ground division by zero, hd/tl of a ground
    empty list)."""
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, NilLit):
        return ()
    if isinstance(e, NeverLit):
        return NEVER
    if isinstance(e, UnitLit):
        return UNIT
    if isinstance(e, Var):
        return st.sigma[e.name]
    if isinstance(e, FieldAcc):
        return st.rho[e.name]
    if isinstance(e, Un):
        return mk_op(e.op, eval_expr(e.e, st))
    if isinstance(e, Bin):
        return mk_op(e.op, eval_expr(e.l, st), eval_expr(e.r, st))
    if isinstance(e, Builtin):
        return mk_op(e.op, *(eval_expr(a, st) for a in e.args))
    raise AssertionError(e)


@dataclass
class LocalCtx:
    """Evaluation context: the object, the future being resolved, the method,
    and the enclosing class (for heap abstraction at suspension points)."""

    program: ast.Program
    cls: ast.ClassDecl
    obj: SymExpr
    fut: SymExpr
    method: str  # qualified C.m
    fg: FreshGen


@dataclass
class TraceSet:
    traces: list
    exhausted: list = dc_field(default_factory=list)  # loop pps out of budget
    stuck: list = dc_field(default_factory=list)  # undefined-evaluation notes

    def merged(self, other: "TraceSet") -> "TraceSet":
        return TraceSet(self.traces + other.traces,
                        self.exhausted + other.exhausted,
                        self.stuck + other.stuck)


def rho_id(cls: ast.ClassDecl, counter: int, base: FMap) -> FMap:
    """Heap abstraction: data fields become symbolic fields with the given
    counter, reference parameters keep their (immutable) values."""
    d = {f: base[f] for f, _cn in cls.refparams}
    for name, _ty, _init in cls.fields:
        d[name] = SymField(name, counter)
    return FMap(d)


def initial_sigma(m: ast.MethodDecl, param_vals) -> FMap:
    """Local state binding parameters to the given values and every local
    variable to its type's default."""
    from .frontend import collect_locals

    d = dict(zip((n for n, _ in m.params), param_vals))
    if len(d) != len(m.params):
        raise ValueError("parameter arity mismatch")
    for n, ty in collect_locals(m).items():
        d[n] = default_value(ty)
    return FMap(d)


def symbolic_params(m: ast.MethodDecl, fg: FreshGen) -> list:
    return [fg.fresh_sym(n, prov=f"param:{n}") for n, _ in m.params]


def _prefix(sc: frozenset, hs: tuple, cont: TraceSet) -> TraceSet:
    out = []
    for t in cont.traces:
        merged = chop(LocalTrace(sc, hs), t)
        assert merged is not None, "continuation must start at the produced state"
        out.append(merged)
    return TraceSet(out, cont.exhausted, cont.stuck)


def stmt_traces(s: Stmt, ctx: LocalCtx, st: ObjectState,
                unroll: int = 8) -> TraceSet:
    return _eval(stmt_list(s), ctx, st, {}, unroll)


def _eval(stmts: list, ctx: LocalCtx, st: ObjectState, budgets: dict,
          unroll: int) -> TraceSet:
    if not stmts:
        return TraceSet([singleton(st)])
    head, rest = stmts[0], stmts[1:]

    if isinstance(head, Skip):
        if not rest:
            return TraceSet([singleton(st)])
        return _eval(rest, ctx, st, budgets, unroll)

    if isinstance(head, Assign):
        v = eval_expr(head.rhs, st)
        if v is None:
            return TraceSet([], stuck=[f"{ctx.method}: undefined evaluation of "
                                       f"'{print_expr(head.rhs)}'"])
        if isinstance(head.target, FieldAcc):
            st2 = st.set_field(head.target.name, v)
        else:
            st2 = st.set_var(head.target.name, v)
        cont = _eval(rest, ctx, st2, budgets, unroll)
        return _prefix(frozenset(), (st, NO_EV, st2), cont)

    if isinstance(head, Get):
        fv = eval_expr(head.fut, st)
        if fv is None:
            return TraceSet([], stuck=[f"{ctx.method}: undefined future expression"])
        sym = ctx.fg.fresh_sym(head.target.name, prov=f"get@{head.pp}")
        st2 = st.set_var(head.target.name, sym)
        ev = FutREv(ctx.obj, fv, None, sym, head.pp)
        cont = _eval(rest, ctx, st2, budgets, unroll)
        return _prefix(frozenset(), (st, ev, st2), cont)

    if isinstance(head, CallStmt):
        callee_val = st.rho[head.callee]
        callee_cls = dict(ctx.cls.refparams)[head.callee]
        args = []
        for a in head.args:
            av = eval_expr(a, st)
            if av is None:
                return TraceSet([], stuck=[f"{ctx.method}: undefined call argument"])
            args.append(av)
        sym = ctx.fg.fresh_sym("f", sort="Fut",
                               prov=f"call:{callee_cls}.{head.method}")
        st2 = st.set_var(head.target.name, sym)
        ev = InvEv(ctx.obj, callee_val, sym, f"{callee_cls}.{head.method}", tuple(args))
        cont = _eval(rest, ctx, st2, budgets, unroll)
        return _prefix(frozenset(), (st, ev, st2), cont)

    if isinstance(head, Await):
        j = ctx.fg.fresh_heap_counter()
        st2 = ObjectState(st.sigma, rho_id(ctx.cls, j, st.rho))
        if head.is_future:
            g = eval_expr(head.guard, st)
            if g is None:
                return TraceSet([], stuck=[f"{ctx.method}: undefined await guard"])
            ev1 = SuspEv(ctx.obj, ctx.fut, g, head.pp)
            ev2 = SuspREv(ctx.obj, ctx.fut, g, head.pp)
        else:
            src = print_expr(head.guard)
            ev1 = CondEv(ctx.obj, ctx.fut, src, head.pp)
            ev2 = CondREv(ctx.obj, ctx.fut, src, head.pp)
        cont = _eval(rest, ctx, st2, budgets, unroll)
        return _prefix(frozenset(), (st, ev1, st, DIAMOND, st2, ev2, st2), cont)

    if isinstance(head, Return):
        assert not rest, "return is the last statement"
        v = eval_expr(head.e, st)
        if v is None:
            return TraceSet([], stuck=[f"{ctx.method}: undefined return value"])
        ev = FutEv(ctx.obj, ctx.fut, ctx.method, v)
        return TraceSet([trace(frozenset(), (st, ev, st))])

    if isinstance(head, If):
        g = eval_expr(head.cond, st)
        if g is None:
            return TraceSet([], stuck=[f"{ctx.method}: undefined branch guard "
                                       f"'{print_expr(head.cond)}'"])
        ng = mk_op("!", g)
        then = _eval(stmt_list(head.then) + rest, ctx, st, budgets, unroll)
        els = _eval(stmt_list(head.els) + rest, ctx, st, budgets, unroll)
        out = [LocalTrace(t.sc | {g}, t.hs) for t in then.traces]
        out += [LocalTrace(t.sc | {ng}, t.hs) for t in els.traces]
        return TraceSet(out, then.exhausted + els.exhausted, then.stuck + els.stuck)

    if isinstance(head, While):
        remaining = budgets.get(head.pp, unroll)
        g = eval_expr(head.cond, st)
        if g is None:
            return TraceSet([], stuck=[f"{ctx.method}: undefined loop guard"])
        ng = mk_op("!", g)
        els = _eval(rest, ctx, st, budgets, unroll)
        out = [LocalTrace(t.sc | {ng}, t.hs) for t in els.traces]
        exhausted = list(els.exhausted)
        stuck = list(els.stuck)
        if remaining <= 0:
            exhausted.append(head.pp)
        else:
            inner_budgets = dict(budgets)
            inner_budgets[head.pp] = remaining - 1
            then = _eval(stmt_list(head.body) + [head, Skip()] + rest,
                         ctx, st, inner_budgets, unroll)
            out += [LocalTrace(t.sc | {g}, t.hs) for t in then.traces]
            exhausted += then.exhausted
            stuck += then.stuck
        return TraceSet(out, exhausted, stuck)

    raise AssertionError(head)


def method_traces(m: ast.MethodDecl, ctx: LocalCtx, st: ObjectState,
                  unroll: int = 8) -> TraceSet:
    """Traces of a method: the invocation reaction prepended to every body
    trace, arguments read from the parameter bindings of the state."""
    args = tuple(st.sigma[n] for n, _ in m.params)
    ev = InvREv(ctx.obj, ctx.fut, ctx.method, args)
    body = stmt_traces(m.body, ctx, st, unroll)
    return _prefix(frozenset(), (st, ev, st), body)
