"""Concrete object/system execution over symbolic method traces.

Processes (sets of traces) commit to one concrete step at a time by
agreement: every trace contributes a candidate (its first three history
elements under the current heap), a value is chosen for the candidate's one
introduced symbol, and all still-selectable candidates must coincide. The
system layer validates communicated events: a read must match a resolving
event already in the global history, an invocation uses a globally fresh
future and injects the callee's traces.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field as dc_field
from typing import Any, Optional

from . import ast
from .events import (
    CondREv, Diamond, FutEv, FutREv, InvEv, InvREv, SuspREv,
    event_symbols, introduced_symbol, is_event, is_suspending,
)
from .localsem import LocalCtx, eval_expr, initial_sigma, method_traces, rho_id
from .parser import CaoError
from .symbolic import FreshGen, SymField, SymVal, substitute, symbols_of
from .traces import (
    LocalTrace, ObjectState, chop, megachop, singleton, state_symbols,
    subst_state, subst_trace, trace_symbols, trace_undefined,
)
from .values import FMap, FutId, ObjRef, is_sem_value


class ConfigError(CaoError):
    pass


# --------------------------------------------------------------- structures


def chi_tuple(d: dict) -> tuple:
    return tuple(sorted(d.items(), key=lambda kv: repr(kv[0])))


def chi_merge(base: tuple, *updates: dict) -> tuple:
    d = dict(base)
    for upd in updates:
        for k, v in upd.items():
            if k in d and d[k] != v:
                raise AssertionError(f"concretizer rebinds {k!r}: {d[k]!r} vs {v!r}")
            d[k] = v
    return chi_tuple(d)


@dataclass(frozen=True)
class Item:
    """One trace of a process, linked to its generating trace and carrying
    the concretizer accumulated along its own path. ``fills`` maps read-value
    symbols to the method that resolved the read future."""

    orig: int
    trace: LocalTrace
    chi: tuple
    fills: tuple = ()


@dataclass(frozen=True)
class Process:
    future: int
    method: str  # qualified C.m
    items: tuple  # of Item
    origs: tuple  # traces as generated (before argument substitution)


@dataclass(frozen=True)
class ObjectConfig:
    name: str
    cls: str
    pool: tuple  # of Process, sorted by future id
    trace: LocalTrace
    active: Optional[Process]

    def heap(self) -> FMap:
        return self.trace.last_state().rho


@dataclass(frozen=True)
class SystemState:
    evs: tuple
    obs: FMap  # name -> ObjectConfig
    nsym: int
    nheap: int
    nfut: int

    def terminated(self) -> bool:
        return all(not o.pool and o.active is None for _, o in self.obs.items())


def _sorted_pool(procs) -> tuple:
    return tuple(sorted(procs, key=lambda p: p.future))


# ------------------------------------------------------------ initial system


def initial_heap(program: ast.Program, cr: ast.Creation) -> FMap:
    cd = program.class_decl(cr.cls)
    d: dict[str, Any] = {}
    for (f, _cn), arg in zip(cd.refparams, cr.args):
        d[f] = ObjRef(arg)
    empty = ObjectState(FMap(), FMap())
    for name, _ty, init in cd.fields:
        v = eval_expr(init, empty)
        if v is None or not is_sem_value(v):
            raise ConfigError(f"field {cr.cls}.{name}: initializer must be ground")
        d[name] = v
    return FMap(d)


def initial_system(program: ast.Program, unroll: int = 8) -> SystemState:
    main = program.main
    if not main.creations:
        raise ConfigError("main block creates no objects")
    names = [cr.var for cr in main.creations]
    heaps = {cr.var: initial_heap(program, cr) for cr in main.creations}
    tgt = main.call_target
    if tgt not in names:
        raise ConfigError(f"main: call target {tgt!r} was not created")
    cls = {cr.var: cr.cls for cr in main.creations}
    try:
        md = program.method_decl(cls[tgt], main.call_method)
    except KeyError:
        raise ConfigError(f"main: {cls[tgt]} has no method {main.call_method!r}")
    empty = ObjectState(FMap(), FMap())
    argvals = []
    for a in main.call_args:
        v = eval_expr(a, empty)
        if v is None or not is_sem_value(v):
            raise ConfigError("main: call arguments must be ground data values")
        argvals.append(v)

    fg = FreshGen()
    fut0 = fg.fresh_future_id()
    qual = f"{cls[tgt]}.{main.call_method}"
    proc, warnings = _make_process(program, cls[tgt], md, qual, ObjRef(tgt),
                                   fut0, tuple(argvals), heaps[tgt], fg, unroll,
                                   concrete_heap=True)
    obs = {}
    for n in names:
        pool = (proc,) if n == tgt else ()
        obs[n] = ObjectConfig(n, cls[n], pool,
                              singleton(ObjectState(FMap(), heaps[n])), None)
    return SystemState((), FMap(obs), fg.sym, fg.heap, fg.fut), warnings


def _make_process(program, clsname, md, qual, obj, fut_id, args, base_rho, fg,
                  unroll, concrete_heap=False) -> tuple:
    cd = program.class_decl(clsname)
    psyms = [fg.fresh_sym(n, prov=f"param:{qual}.{n}") for n, _ in md.params]
    sigma = initial_sigma(md, psyms)
    if concrete_heap:
        rho = base_rho
    else:
        rho = rho_id(cd, fg.fresh_heap_counter(), base_rho)
    ctx = LocalCtx(program, cd, obj, FutId(fut_id), qual, fg)
    ts = method_traces(md, ctx, ObjectState(sigma, rho), unroll)
    sub = dict(zip(psyms, args))
    chi0 = chi_tuple(sub)
    items = []
    undefined = 0
    for i, t in enumerate(ts.traces):
        inst = subst_trace(t, sub)
        if trace_undefined(inst):
            undefined += 1  # the arguments make this branch undefined
            continue
        items.append(Item(i, inst, chi0, ()))
    items = tuple(items)
    warnings = [f"{qual}: loop at pp {pp} hit the unroll budget" for pp in ts.exhausted]
    warnings += [f"stuck branch dropped: {m}" for m in ts.stuck]
    if undefined:
        warnings.append(f"{qual}: {undefined} branch(es) undefined for these "
                        f"arguments")
    return Process(fut_id, qual, items, tuple(ts.traces)), warnings


# -------------------------------------------------------- candidates & agree


@dataclass(frozen=True)
class Candidate:
    sc: frozenset
    hs: tuple  # three elements under the current heap
    introduced: Optional[SymVal]
    applied: LocalTrace
    heap_bindings: tuple  # ((SymField, value), ...)

    def as_trace(self) -> LocalTrace:
        return LocalTrace(self.sc, self.hs)


def heap_substitution(t: LocalTrace, rho) -> dict:
    """The symbolic-field substitution the current heap induces on the part
    of the history before the first marker."""
    cut = len(t.hs)
    for i, el in enumerate(t.hs):
        if isinstance(el, Diamond):
            cut = i
            break
    touched: set = set()
    for el in t.hs[:cut]:
        syms = state_symbols(el) if isinstance(el, ObjectState) else event_symbols(el)
        touched |= {s for s in syms if isinstance(s, SymField)}
    return {sf: rho[sf.fieldname] for sf in sorted(touched, key=repr)
            if sf.fieldname in rho}


def selection_candidate(theta: LocalTrace, rho) -> Optional[Candidate]:
    """The first three history elements under ``rho``; None when a foreign
    symbolic value survives in them."""
    sub = heap_substitution(theta, rho)
    applied = subst_trace(theta, sub) if sub else theta
    if sub and trace_undefined(applied):
        return None  # this heap makes the trace undefined
    if len(applied.hs) < 3:
        return None
    hs3 = applied.hs[:3]
    ev = hs3[1]
    if not is_event(ev):
        return None
    intro = introduced_symbol(ev)
    syms = set(state_symbols(hs3[0]) | event_symbols(ev) | state_symbols(hs3[2]))
    syms.discard(intro)
    if syms:
        return None
    allowed = frozenset() if intro is None else frozenset((intro,))
    sc_c = frozenset(c for c in applied.sc if symbols_of(c) <= allowed)
    return Candidate(sc_c, hs3, intro, applied, chi_tuple(sub))


class ValueOracle:
    """Supplies the concrete values agreement may commit to: read values come
    from resolved futures in the global history, call futures take the next
    globally fresh id."""

    def __init__(self, evs: tuple, next_future: int):
        self.evs = evs
        self.next_future = next_future

    def future_values(self, fut) -> list:
        out = []
        for ev in self.evs:
            if isinstance(ev, FutEv) and ev.fut == fut:
                out.append((ev.value, ev.method))
        return out

    def fresh_future(self) -> FutId:
        return FutId(self.next_future)


def _selectable(c: Candidate, sub: dict) -> bool:
    for cond in c.sc:
        v = substitute(cond, sub)
        if v is not True:
            return False
    return True


def _subst_hs3(hs: tuple, sub: dict) -> tuple:
    from .events import subst_event

    return (subst_state(hs[0], sub), subst_event(hs[1], sub), subst_state(hs[2], sub))


@dataclass(frozen=True)
class Agreed:
    trace: LocalTrace  # the agreed concrete three-element trace
    event: Any
    cont_items: tuple  # surviving Items with the step applied
    survivors: tuple  # surviving orig indices
    subst: tuple  # ((SymVal, value), ...)
    finished: bool
    finished_items: tuple  # Items that consumed their final event here


def _commitments(c: Candidate, oracle: ValueOracle) -> list:
    ev = c.hs[1]
    if c.introduced is None:
        return [({}, None)]
    if isinstance(ev, InvEv):
        return [({c.introduced: oracle.fresh_future()}, None)]
    if isinstance(ev, FutREv):
        if not isinstance(ev.fut, FutId):
            return []  # reading Never: the object blocks here
        return [({c.introduced: v}, m) for v, m in oracle.future_values(ev.fut)]
    raise AssertionError(f"event {ev!r} cannot introduce {c.introduced!r}")


def agree(items: tuple, rho, oracle: ValueOracle) -> list:
    """All steps the process can commit to under the given heap.

    Empty when some trace cannot form a candidate or no choice makes all
    selectable candidates coincide.
    """
    cands = []
    for it in items:
        c = selection_candidate(it.trace, rho)
        if c is None:
            return []
        cands.append((it, c))

    outcomes = []
    seen = set()
    for _it, c in cands:
        for sub, mfill in _commitments(c, oracle):
            if not _selectable(c, sub):
                continue
            hs_f = _subst_hs3(c.hs, sub)
            probe = LocalTrace(frozenset(), hs_f)
            if trace_undefined(probe):
                continue
            key = (hs_f, chi_tuple(sub))
            if key in seen:
                continue
            seen.add(key)
            ok = True
            survivors = []
            for it2, c2 in cands:
                if not _selectable(c2, sub):
                    continue
                if _subst_hs3(c2.hs, sub) != hs_f:
                    ok = False
                    break
                survivors.append((it2, c2))
            if not ok or not survivors:
                continue
            ev = hs_f[1]
            if isinstance(ev, FutREv) and mfill is not None and ev.method is None:
                ev = FutREv(ev.obj, ev.fut, mfill, ev.value, ev.pp)
            assert not (state_symbols(hs_f[0]) | event_symbols(ev)
                        | state_symbols(hs_f[2])), "agreed step must be concrete"
            theta_f = LocalTrace(frozenset(), (hs_f[0], ev, hs_f[2]))
            suspending = is_suspending(ev)
            cont, done = [], []
            dropped = 0
            for it2, c2 in survivors:
                full = subst_trace(c2.applied, sub)
                if trace_undefined(full):
                    dropped += 1  # this value kills the rest of the trace
                    continue
                # the step decomposes the trace: applying this agreement's
                # concretizer delta to the stored trace reproduces it
                merged = dict(c2.heap_bindings)
                merged.update(sub)
                assert subst_trace(it2.trace, merged).hs == full.hs, \
                    "continuation must share the concretizer with its parent"
                suffix = full.hs[2:]
                if suspending:
                    assert len(suffix) >= 3 and isinstance(suffix[1], Diamond)
                    suffix = suffix[2:]
                chi = chi_merge(it2.chi, sub, dict(c2.heap_bindings))
                fills = it2.fills
                if mfill is not None and c2.introduced is not None:
                    fills = fills + ((c2.introduced, mfill),)
                if len(suffix) <= 1:
                    done.append(Item(it2.orig, LocalTrace(full.sc, suffix), chi, fills))
                else:
                    cont.append(Item(it2.orig, LocalTrace(full.sc, suffix), chi, fills))
            assert not (cont and done), "traces of one process end together"
            if not cont and not done:
                continue  # every continuation evaporated: no step
            outcomes.append(Agreed(theta_f, ev, tuple(cont),
                                   tuple(sorted(i.orig for i in cont or done)),
                                   chi_tuple(sub), bool(done), tuple(done)))
    return outcomes


# ----------------------------------------------------------------- stepping


@dataclass(frozen=True)
class ProcFinish:
    obj: str
    method: str
    future: int
    items: tuple  # finished Items (chi complete)
    origs: tuple


@dataclass
class Succ:
    event: Any
    state: SystemState
    obj: str
    rule: str
    finished: Optional[ProcFinish] = None
    warnings: tuple = ()


def _guard_ready(program: ast.Program, ev, first_state: ObjectState, evs) -> bool:
    """Reaction-event side conditions for rescheduling a suspended process."""
    if isinstance(ev, CondREv):
        kind, node = program.program_points()[ev.pp]
        assert kind == "await"
        v = eval_expr(node.guard, first_state)
        return v is True
    if isinstance(ev, SuspREv):
        return any(isinstance(e, FutEv) and e.fut == ev.awaited for e in evs)
    return True


def successors(program: ast.Program, st: SystemState, unroll: int = 8) -> list:
    out: list[Succ] = []
    oracle = ValueOracle(st.evs, st.nfut)
    for name, obj in st.obs.items():
        rho = obj.heap()
        if obj.active is None:
            for proc in obj.pool:
                for ag in agree(proc.items, rho, oracle):
                    if is_suspending(ag.event):
                        continue  # cannot schedule into immediate suspension
                    if not _guard_ready(program, ag.event, ag.trace.hs[0], st.evs):
                        continue
                    new_trace = megachop(obj.trace, ag.trace)
                    if new_trace is None:
                        continue  # heaps disagree: rule inapplicable
                    out.extend(_system_wrap(program, st, obj, ag, new_trace,
                                            pool=tuple(p for p in obj.pool if p is not proc),
                                            proc=proc, rule="O-Schedule", unroll=unroll))
        else:
            proc = obj.active
            for ag in agree(proc.items, rho, oracle):
                if is_suspending(ag.event):
                    new_trace = chop(obj.trace, ag.trace)
                    assert new_trace is not None
                    cont = Process(proc.future, proc.method, ag.cont_items, proc.origs)
                    new_obj = ObjectConfig(name, obj.cls,
                                           _sorted_pool(obj.pool + (cont,)),
                                           new_trace, None)
                    st2 = SystemState(st.evs + (ag.event,),
                                      st.obs.set(name, new_obj),
                                      st.nsym, st.nheap, st.nfut)
                    out.append(Succ(ag.event, st2, name, "O-Deschedule"))
                    continue
                new_trace = chop(obj.trace, ag.trace)
                assert new_trace is not None
                out.extend(_system_wrap(program, st, obj, ag, new_trace,
                                        pool=obj.pool, proc=proc, rule="O-Step",
                                        unroll=unroll))
    return out


def _system_wrap(program, st: SystemState, obj: ObjectConfig, ag: Agreed,
                 new_trace: LocalTrace, pool: tuple, proc: Process, rule: str,
                 unroll: int) -> list:
    """Apply the system-level rule matching the agreed event."""
    name = obj.name
    ev = ag.event
    finished = None
    if ag.finished:
        active = None
        finished = ProcFinish(name, proc.method, proc.future,
                              ag.finished_items, proc.origs)
    else:
        active = Process(proc.future, proc.method, ag.cont_items, proc.origs)
    new_obj = ObjectConfig(name, obj.cls, pool, new_trace, active)
    obs = st.obs.set(name, new_obj)

    if isinstance(ev, InvEv):
        # S-Invoc: commit the fresh future and add the callee process.
        assert ev.fut == FutId(st.nfut), "invocation must use the next fresh future"
        assert isinstance(ev.callee, ObjRef), "callee must be a created object"
        callee = obs[ev.callee.name]
        fg = FreshGen(sym=st.nsym, heap=st.nheap, fut=st.nfut)
        fg.fresh_future_id()
        cls, mname = ev.method.split(".", 1)
        md = program.method_decl(cls, mname)
        newproc, warnings = _make_process(program, callee.cls, md, ev.method,
                                          ObjRef(callee.name), ev.fut.id,
                                          ev.args, callee.heap(), fg, unroll)
        callee2 = ObjectConfig(callee.name, callee.cls,
                               _sorted_pool(callee.pool + (newproc,)),
                               callee.trace, callee.active)
        obs = obs.set(callee.name, callee2)
        st2 = SystemState(st.evs + (ev,), obs, fg.sym, fg.heap, fg.fut)
        return [Succ(ev, st2, name, "S-Invoc", finished, tuple(warnings))]

    if isinstance(ev, FutREv):
        # S-Get: the read value must match the resolving event.
        assert any(isinstance(e, FutEv) and e.fut == ev.fut and e.value == ev.value
                   for e in st.evs), "read value must match a resolved future"
        st2 = SystemState(st.evs + (ev,), obs, st.nsym, st.nheap, st.nfut)
        return [Succ(ev, st2, name, "S-Get", finished)]

    st2 = SystemState(st.evs + (ev,), obs, st.nsym, st.nheap, st.nfut)
    return [Succ(ev, st2, name, f"S-Internal/{rule}", finished)]


# --------------------------------------------------------------- exploration


@dataclass
class ExploreConfig:
    step_bound: int = 10000
    unroll: int = 8
    policy: str = "exhaustive"  # or "random"
    seed: int = 0
    dedup: bool = True
    check: bool = True
    max_runs: Optional[int] = None


@dataclass
class ProcRecord:
    obj: str
    method: str
    future: int
    chi: dict
    survivors: tuple
    selected: list  # concretized surviving traces
    origs: tuple


@dataclass
class Run:
    status: str  # terminated | stuck | truncated
    steps: tuple  # ((obj, event), ...)
    evs: tuple
    gamma: tuple
    finished: tuple  # ProcRecord
    warnings: tuple
    object_traces: dict  # object name -> final LocalTrace


@dataclass
class ExploreResult:
    runs: list
    stuck: list
    truncated: list
    stats: dict

    def all_selected(self, method: Optional[str] = None) -> list:
        out = []
        for r in self.runs:
            for pr in r.finished:
                if method is None or pr.method == method:
                    out.extend(pr.selected)
        return out


def global_state(st: SystemState) -> FMap:
    return FMap({name: o.heap() for name, o in st.obs.items()})


def _fill_methods(t: LocalTrace, fills: dict) -> LocalTrace:
    """Fill the resolving method into read events whose value symbol was
    committed by an agreement."""
    hs = []
    for el in t.hs:
        if isinstance(el, FutREv) and el.method is None and el.value in fills:
            el = FutREv(el.obj, el.fut, fills[el.value], el.value, el.pp)
        hs.append(el)
    return LocalTrace(t.sc, tuple(hs))


def _finish_record(pf: ProcFinish, check: bool) -> ProcRecord:
    chi: dict = {}
    for it in pf.items:
        chi = dict(chi_merge(chi_tuple(chi), dict(it.chi)))
    selected = []
    for it in pf.items:
        filled = _fill_methods(pf.origs[it.orig], dict(it.fills))
        concrete = subst_trace(filled, dict(it.chi))
        if check:
            assert not trace_symbols(concrete), "selected trace must be concrete"
        if concrete not in selected:
            selected.append(concrete)
    return ProcRecord(pf.obj, pf.method, pf.future, chi,
                      tuple(sorted({it.orig for it in pf.items})), selected,
                      pf.origs)


def _check_step(st2: SystemState, ev):
    for _, o in st2.obs.items():
        for _, v in o.heap().items():
            assert is_sem_value(v), "object heaps stay concrete"
    if isinstance(ev, InvEv):
        assert sum(1 for e in st2.evs
                   if isinstance(e, InvEv) and e.fut == ev.fut) == 1, \
            "invocation futures are globally fresh"
    if isinstance(ev, InvREv):
        assert ev.fut == FutId(0) or any(
            isinstance(e, InvEv) and e.fut == ev.fut for e in st2.evs), \
            "invocation reaction must follow its invocation"


def explore(program: ast.Program, cfg: Optional[ExploreConfig] = None):
    cfg = cfg or ExploreConfig()
    init, warns0 = initial_system(program, cfg.unroll)
    runs: list[Run] = []
    stuck: list[Run] = []
    truncated: list[Run] = []
    stats = {"states": 0, "dedup_hits": 0, "transitions": 0}
    seen: set = set()

    if cfg.policy == "random":
        rng = random.Random(cfg.seed)
        st, steps, finished, warnings = init, (), (), tuple(warns0)
        gamma = (global_state(init),)
        while True:
            stats["states"] += 1
            traces = {name: o.trace for name, o in st.obs.items()}
            if st.terminated():
                runs.append(Run("terminated", steps, st.evs, gamma, finished,
                                warnings, traces))
                break
            if len(steps) >= cfg.step_bound:
                truncated.append(Run("truncated", steps, st.evs, gamma,
                                     finished, warnings, traces))
                break
            succ = successors(program, st, cfg.unroll)
            if not succ:
                stuck.append(Run("stuck", steps, st.evs, gamma, finished,
                                 warnings, traces))
                break
            ch = succ[rng.randrange(len(succ))]
            if cfg.check:
                _check_step(ch.state, ch.event)
            if ch.finished is not None:
                finished = finished + (_finish_record(ch.finished, cfg.check),)
            warnings = warnings + ch.warnings
            steps = steps + ((ch.obj, ch.event),)
            gamma = gamma + (ch.event, global_state(ch.state))
            st = ch.state
        return ExploreResult(runs, stuck, truncated, stats)

    # exhaustive DFS
    stack = [(init, (), (), tuple(warns0), (global_state(init),))]
    while stack:
        st, steps, finished, warnings, gamma = stack.pop()
        if cfg.dedup:
            key = st
            if key in seen:
                stats["dedup_hits"] += 1
                continue
            seen.add(key)
        stats["states"] += 1
        if st.terminated():
            runs.append(Run("terminated", steps, st.evs, gamma, finished,
                            warnings, {n: o.trace for n, o in st.obs.items()}))
            if cfg.max_runs and len(runs) >= cfg.max_runs:
                break
            continue
        if len(steps) >= cfg.step_bound:
            truncated.append(Run("truncated", steps, st.evs, gamma, finished,
                                 warnings, {n: o.trace for n, o in st.obs.items()}))
            continue
        succ = successors(program, st, cfg.unroll)
        if not succ:
            stuck.append(Run("stuck", steps, st.evs, gamma, finished,
                             warnings, {n: o.trace for n, o in st.obs.items()}))
            continue
        stats["transitions"] += len(succ)
        for ch in reversed(succ):
            if cfg.check:
                _check_step(ch.state, ch.event)
            fin = finished
            if ch.finished is not None:
                fin = finished + (_finish_record(ch.finished, cfg.check),)
            stack.append((ch.state, steps + ((ch.obj, ch.event),), fin,
                          warnings + ch.warnings,
                          gamma + (ch.event, global_state(ch.state))))
    return ExploreResult(runs, stuck, truncated, stats)


def selected_local_traces(program: ast.Program, method: str,
                          cfg: Optional[ExploreConfig] = None) -> list:
    """Concretized per-process traces of a method over all terminated runs."""
    res = explore(program, cfg or ExploreConfig())
    out = []
    for t in res.all_selected(method):
        if t not in out:
            out.append(t)
    return out
