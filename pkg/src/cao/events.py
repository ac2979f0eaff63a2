"""Trace events. Each communication event pairs with a reaction event; noEv
marks steps without visible communication. The interleaving marker is a
separate history element, not an event."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from .symbolic import SymVal, pretty_expr, substitute, symbols_of, expr_to_json


@dataclass(frozen=True)
class InvEv:
    """Caller-side view of an asynchronous call."""

    caller: Any
    callee: Any
    fut: Any
    method: str
    args: tuple

    def __repr__(self) -> str:
        return pretty_event(self)


@dataclass(frozen=True)
class InvREv:
    """Callee-side view of an asynchronous call; the caller is not visible."""

    obj: Any
    fut: Any
    method: str
    args: tuple

    def __repr__(self) -> str:
        return pretty_event(self)


@dataclass(frozen=True)
class FutEv:
    """Process termination: the future is resolved with the return value."""

    obj: Any
    fut: Any
    method: str
    value: Any

    def __repr__(self) -> str:
        return pretty_event(self)


@dataclass(frozen=True)
class FutREv:
    """A get reads a resolved future. The resolving method is unknown during
    local generation (None) and is filled in when the read is committed."""

    obj: Any
    fut: Any
    method: Optional[str]
    value: Any
    pp: int

    def __repr__(self) -> str:
        return pretty_event(self)


@dataclass(frozen=True)
class CondEv:
    """Suspension on a boolean guard; carries the guard source text."""

    obj: Any
    fut: Any
    guard_src: str
    pp: int

    def __repr__(self) -> str:
        return pretty_event(self)


@dataclass(frozen=True)
class CondREv:
    obj: Any
    fut: Any
    guard_src: str
    pp: int

    def __repr__(self) -> str:
        return pretty_event(self)


@dataclass(frozen=True)
class SuspEv:
    """Suspension on a future guard; carries the evaluated future."""

    obj: Any
    fut: Any
    awaited: Any
    pp: int

    def __repr__(self) -> str:
        return pretty_event(self)


@dataclass(frozen=True)
class SuspREv:
    obj: Any
    fut: Any
    awaited: Any
    pp: int

    def __repr__(self) -> str:
        return pretty_event(self)


@dataclass(frozen=True)
class NoEv:
    def __repr__(self) -> str:
        return "noEv"


@dataclass(frozen=True)
class Diamond:
    """The interleaving marker; a history element but not an event."""

    def __repr__(self) -> str:
        return "<>"


NO_EV = NoEv()
DIAMOND = Diamond()

Event = Any  # one of the classes above except Diamond

EVENT_KINDS = {
    InvEv: "invEv", InvREv: "invREv", FutEv: "futEv", FutREv: "futREv",
    CondEv: "condEv", CondREv: "condREv", SuspEv: "suspEv",
    SuspREv: "suspREv", NoEv: "noEv",
}


def is_event(x: Any) -> bool:
    return type(x) in EVENT_KINDS


def is_suspending(ev: Event) -> bool:
    return isinstance(ev, (CondEv, SuspEv))


def introduced_symbol(ev: Event) -> Optional[SymVal]:
    """The symbolic value an event introduces, if any."""
    if isinstance(ev, InvEv) and isinstance(ev.fut, SymVal):
        return ev.fut
    if isinstance(ev, FutREv) and isinstance(ev.value, SymVal):
        return ev.value
    return None


def event_payload(ev: Event) -> tuple:
    if isinstance(ev, InvEv):
        return (ev.caller, ev.callee, ev.fut, ev.method, ev.args)
    if isinstance(ev, InvREv):
        return (ev.obj, ev.fut, ev.method, ev.args)
    if isinstance(ev, FutEv):
        return (ev.obj, ev.fut, ev.method, ev.value)
    if isinstance(ev, FutREv):
        return (ev.obj, ev.fut, ev.method, ev.value, ev.pp)
    if isinstance(ev, (CondEv, CondREv)):
        return (ev.obj, ev.fut, ev.guard_src, ev.pp)
    if isinstance(ev, (SuspEv, SuspREv)):
        return (ev.obj, ev.fut, ev.awaited, ev.pp)
    return ()


def subst_event(ev: Event, sub) -> Event:
    def s(x):
        return substitute(x, sub)

    def sargs(args):
        return tuple(s(a) for a in args)

    if isinstance(ev, InvEv):
        return InvEv(s(ev.caller), s(ev.callee), s(ev.fut), ev.method, sargs(ev.args))
    if isinstance(ev, InvREv):
        return InvREv(s(ev.obj), s(ev.fut), ev.method, sargs(ev.args))
    if isinstance(ev, FutEv):
        return FutEv(s(ev.obj), s(ev.fut), ev.method, s(ev.value))
    if isinstance(ev, FutREv):
        return FutREv(s(ev.obj), s(ev.fut), ev.method, s(ev.value), ev.pp)
    if isinstance(ev, CondEv):
        return CondEv(s(ev.obj), s(ev.fut), ev.guard_src, ev.pp)
    if isinstance(ev, CondREv):
        return CondREv(s(ev.obj), s(ev.fut), ev.guard_src, ev.pp)
    if isinstance(ev, SuspEv):
        return SuspEv(s(ev.obj), s(ev.fut), s(ev.awaited), ev.pp)
    if isinstance(ev, SuspREv):
        return SuspREv(s(ev.obj), s(ev.fut), s(ev.awaited), ev.pp)
    return ev


def event_symbols(ev: Event) -> frozenset:
    out: frozenset = frozenset()
    for x in event_payload(ev):
        if isinstance(x, str) or x is None:
            continue  # method names and guard sources are not value slots
        out |= symbols_of(x)
    return out


def pretty_event(ev: Event) -> str:
    kind = EVENT_KINDS[type(ev)]
    if isinstance(ev, NoEv):
        return "noEv"

    def p(x):
        if isinstance(x, str):
            return x if x else "?"
        if isinstance(x, tuple):
            return "[" + ", ".join(pretty_expr(a) for a in x) + "]"
        return pretty_expr(x)

    parts = []
    for x in event_payload(ev):
        if x is None:
            parts.append("_")
        else:
            parts.append(p(x))
    return f"{kind}(" + ", ".join(parts) + ")"


def event_to_json(ev: Any) -> Any:
    if isinstance(ev, Diamond):
        return {"marker": "diamond"}
    kind = EVENT_KINDS[type(ev)]
    out: dict[str, Any] = {"ev": kind}
    if isinstance(ev, InvEv):
        out.update(caller=expr_to_json(ev.caller), callee=expr_to_json(ev.callee),
                   fut=expr_to_json(ev.fut), method=ev.method,
                   args=[expr_to_json(a) for a in ev.args])
    elif isinstance(ev, InvREv):
        out.update(obj=expr_to_json(ev.obj), fut=expr_to_json(ev.fut),
                   method=ev.method, args=[expr_to_json(a) for a in ev.args])
    elif isinstance(ev, FutEv):
        out.update(obj=expr_to_json(ev.obj), fut=expr_to_json(ev.fut),
                   method=ev.method, value=expr_to_json(ev.value))
    elif isinstance(ev, FutREv):
        out.update(obj=expr_to_json(ev.obj), fut=expr_to_json(ev.fut),
                   method=ev.method, value=expr_to_json(ev.value), pp=ev.pp)
    elif isinstance(ev, (CondEv, CondREv)):
        out.update(obj=expr_to_json(ev.obj), fut=expr_to_json(ev.fut),
                   guard=ev.guard_src, pp=ev.pp)
    elif isinstance(ev, (SuspEv, SuspREv)):
        out.update(obj=expr_to_json(ev.obj), fut=expr_to_json(ev.fut),
                   awaited=expr_to_json(ev.awaited), pp=ev.pp)
    return out
