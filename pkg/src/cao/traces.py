"""Local traces: a selection condition set plus an alternating history of
object states and events (or the interleaving marker).

The history has odd length; odd positions (1-indexed) hold object states and
even positions hold events or the marker. Two chopping operators merge
histories: the plain chop requires the boundary states to be equal, the
extended chop additionally bridges a changed local state over an unchanged
heap by inserting the marker.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional

from .events import (
    DIAMOND, Diamond, event_symbols, event_to_json, is_event, pretty_event,
    subst_event,
)
from .symbolic import (
    SymField, expr_to_json, is_symbolic, pretty_expr, substitute, symbols_of,
)
from .values import FMap, is_sem_value


@dataclass(frozen=True)
class ObjectState:
    """A local state paired with a heap. Concrete iff every image is ground."""

    sigma: FMap
    rho: FMap

    def is_concrete(self) -> bool:
        return all(is_sem_value(v) for _, v in self.sigma.items()) and \
            all(is_sem_value(v) for _, v in self.rho.items())

    def set_var(self, v: str, val) -> "ObjectState":
        return ObjectState(self.sigma.set(v, val), self.rho)

    def set_field(self, f: str, val) -> "ObjectState":
        return ObjectState(self.sigma, self.rho.set(f, val))

    def __repr__(self) -> str:
        return pretty_state(self)


def pretty_state(st: ObjectState) -> str:
    sig = ", ".join(f"{k}={pretty_expr(v)}" for k, v in st.sigma.items())
    rho = ", ".join(f"{k}={pretty_expr(v)}" for k, v in st.rho.items())
    return f"({sig or '.'} | {rho})"


def state_symbols(st: ObjectState) -> frozenset:
    out: frozenset = frozenset()
    for _, v in st.sigma.items():
        out |= symbols_of(v)
    for _, v in st.rho.items():
        out |= symbols_of(v)
    return out


def subst_state(st: ObjectState, sub: Mapping) -> ObjectState:
    return ObjectState(
        FMap({k: substitute(v, sub) for k, v in st.sigma.items()}),
        FMap({k: substitute(v, sub) for k, v in st.rho.items()}),
    )


@dataclass(frozen=True)
class LocalTrace:
    sc: frozenset  # Bool-typed symbolic expressions
    hs: tuple  # alternating ObjectState / event-or-marker, odd length

    def __post_init__(self):
        if not self.hs or len(self.hs) % 2 == 0:
            raise ValueError("history must be non-empty with odd length")
        for i, el in enumerate(self.hs):
            if i % 2 == 0:
                if not isinstance(el, ObjectState):
                    raise ValueError(f"history position {i + 1} must be a state")
            elif not (is_event(el) or isinstance(el, Diamond)):
                raise ValueError(f"history position {i + 1} must be an event or marker")

    def first_state(self) -> ObjectState:
        return self.hs[0]

    def last_state(self) -> ObjectState:
        return self.hs[-1]

    def __len__(self) -> int:
        return len(self.hs)

    def __repr__(self) -> str:
        return pretty_trace(self)


def trace(sc: Iterable, hs: Iterable) -> LocalTrace:
    return LocalTrace(frozenset(sc), tuple(hs))


def singleton(st: ObjectState) -> LocalTrace:
    return LocalTrace(frozenset(), (st,))


def chop(t1: LocalTrace, t2: LocalTrace) -> Optional[LocalTrace]:
    """Merge when the last state of t1 equals the first of t2; sc by union."""
    if t1.last_state() != t2.first_state():
        return None
    return LocalTrace(t1.sc | t2.sc, t1.hs + t2.hs[1:])


def megachop(t1: LocalTrace, t2: LocalTrace) -> Optional[LocalTrace]:
    """Like chop; when only the heaps agree, bridge with the marker."""
    s1, s2 = t1.last_state(), t2.first_state()
    if s1 == s2:
        return LocalTrace(t1.sc | t2.sc, t1.hs + t2.hs[1:])
    if s1.rho == s2.rho:
        return LocalTrace(t1.sc | t2.sc, t1.hs + (DIAMOND,) + t2.hs)
    return None


def trace_symbols(t: LocalTrace) -> frozenset:
    out: frozenset = frozenset()
    for el in t.hs:
        if isinstance(el, ObjectState):
            out |= state_symbols(el)
        elif not isinstance(el, Diamond):
            out |= event_symbols(el)
    return out


def subst_trace(t: LocalTrace, sub: Mapping, subst_sc: bool = True) -> LocalTrace:
    hs = tuple(
        subst_state(el, sub) if isinstance(el, ObjectState)
        else el if isinstance(el, Diamond) else subst_event(el, sub)
        for el in t.hs
    )
    sc = frozenset(substitute(c, sub) for c in t.sc) if subst_sc else t.sc
    return LocalTrace(sc, hs)


def apply_heap(t: LocalTrace, rho: Mapping) -> LocalTrace:
    """Substitute symbolic fields with their heap values up to the first
    marker; the selection condition substitutes only fields that were
    substituted in the history. Ground results fold immediately."""
    cut = len(t.hs)
    for i, el in enumerate(t.hs):
        if isinstance(el, Diamond):
            cut = i
            break
    touched: set = set()
    for el in t.hs[:cut]:
        syms = state_symbols(el) if isinstance(el, ObjectState) else event_symbols(el)
        touched |= {s for s in syms if isinstance(s, SymField)}
    sub = {sf: rho[sf.fieldname] for sf in touched if sf.fieldname in rho}
    if not sub:
        return t
    head = tuple(
        subst_state(el, sub) if isinstance(el, ObjectState) else subst_event(el, sub)
        for el in t.hs[:cut]
    )
    sc = frozenset(substitute(c, sub) for c in t.sc)
    return LocalTrace(sc, head + t.hs[cut:])


def pretty_trace(t: LocalTrace) -> str:
    sc = "{" + ", ".join(sorted(pretty_expr(c) for c in t.sc)) + "}"
    items = []
    for el in t.hs:
        if isinstance(el, ObjectState):
            items.append(pretty_state(el))
        elif isinstance(el, Diamond):
            items.append("<>")
        else:
            items.append(pretty_event(el))
    return sc + " |> <" + ", ".join(items) + ">"


def state_to_json(st: ObjectState) -> Any:
    return {
        "vars": {k: expr_to_json(v) for k, v in st.sigma.items()},
        "fields": {k: expr_to_json(v) for k, v in st.rho.items()},
    }


def trace_to_json(t: LocalTrace) -> Any:
    hs = []
    for el in t.hs:
        if isinstance(el, ObjectState):
            hs.append({"state": state_to_json(el)})
        else:
            hs.append(event_to_json(el))
    return {"sc": sorted(pretty_expr(c) for c in t.sc), "hs": hs}


def is_concrete_trace(t: LocalTrace) -> bool:
    return not trace_symbols(t)


def _has_none(x) -> bool:
    if x is None:
        return True
    if isinstance(x, tuple):
        return any(_has_none(a) for a in x)
    from .symbolic import OpApp

    if isinstance(x, OpApp):
        return any(_has_none(a) for a in x.args)
    return False


def trace_undefined(t: LocalTrace) -> bool:
    """True when some substitution folded a subterm to the undefined
    outcome: the trace does not exist under that instantiation."""
    from .events import event_payload

    for c in t.sc:
        if _has_none(c):
            return True
    for el in t.hs:
        if isinstance(el, ObjectState):
            for _k, v in el.sigma.items():
                if _has_none(v):
                    return True
            for _k, v in el.rho.items():
                if _has_none(v):
                    return True
        elif not isinstance(el, Diamond):
            from .events import FutREv

            for i, x in enumerate(event_payload(el)):
                if isinstance(el, FutREv) and i == 2:
                    continue  # an unfilled resolver slot is not a value
                if _has_none(x):
                    return True
    return False
