"""Symbolic expressions: semantic values extended with symbolic values,
symbolic fields and operator applications.

Ground operator applications fold to semantic values at construction time;
an application over at least one symbolic subterm stays a tree. Folding of
``hd``/``tl`` on an empty ground list or division by a ground zero yields the
``undefined`` outcome, represented as ``None``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Optional

from .values import FMap, pretty_value, value_to_json, is_sem_value

SymExpr = Any  # SemValue | SymVal | SymField | OpApp


@dataclass(frozen=True)
class SymVal:
    """A symbolic value: a named placeholder with no defined operations.

    Equality is by name; names are globally unique when issued by FreshGen.
    ``prov`` records which rule/event created the symbol (debug only).
    """

    name: str
    sort: str = "Any"
    prov: str = field(default="", compare=False)

    def __repr__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class SymField:
    """A symbolic field: abstracts a heap slot up to the next heap boundary."""

    fieldname: str
    counter: int

    def __repr__(self) -> str:
        return f"this.{self.fieldname}_{self.counter}"


@dataclass(frozen=True)
class OpApp:
    op: str
    args: tuple

    def __repr__(self) -> str:
        return pretty_expr(self)


class FreshGen:
    """Issues globally fresh symbolic names, heap counters and future ids.

    An explicit value, never global state; pass one generator per evaluation
    context and never reuse it across contexts that must not share ids.
    """

    def __init__(self, sym: int = 0, heap: int = 0, fut: int = 0):
        self.sym = sym
        self.heap = heap
        self.fut = fut

    def fresh_sym(self, base: str, sort: str = "Any", prov: str = "") -> SymVal:
        self.sym += 1
        return SymVal(f"{base}{self.sym}", sort, prov)

    def fresh_heap_counter(self) -> int:
        self.heap += 1
        return self.heap

    def fresh_future_id(self) -> int:
        n = self.fut
        self.fut += 1
        return n

    def snapshot(self) -> tuple[int, int, int]:
        return (self.sym, self.heap, self.fut)


_COMPARISON_FLIP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}

_NUMERIC = (int, Fraction)


def is_symbolic(x: SymExpr) -> bool:
    return isinstance(x, (SymVal, SymField, OpApp))


def _arith(op: str, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    raise AssertionError(op)


def _fold(op: str, args: tuple) -> Optional[SymExpr]:
    """Apply ``op`` to ground arguments; None when undefined."""
    if op == "!":
        return not args[0]
    if op == "neg":
        return -args[0]
    if op == "len":
        if not isinstance(args[0], tuple):
            return None
        return len(args[0])
    if op == "hd":
        if not isinstance(args[0], tuple) or not args[0]:
            return None
        return args[0][0]
    if op == "tl":
        if not isinstance(args[0], tuple) or not args[0]:
            return None
        return args[0][1:]
    if op == "Cons":
        if not isinstance(args[1], tuple):
            return None
        return (args[0],) + args[1]
    a, b = args
    if op in ("+", "-", "*"):
        if not (isinstance(a, _NUMERIC) and isinstance(b, _NUMERIC)):
            return None
        return _arith(op, a, b)
    if op == "/":
        if not (isinstance(a, _NUMERIC) and isinstance(b, _NUMERIC)) or b == 0:
            return None
        return Fraction(a) / Fraction(b)
    if op == "&&":
        return bool(a) and bool(b)
    if op == "||":
        return bool(a) or bool(b)
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op in ("<", "<=", ">", ">="):
        if not (isinstance(a, _NUMERIC) and isinstance(b, _NUMERIC)):
            return None
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
    raise AssertionError(f"unknown operator {op}")


def mk_op(op: str, *args: SymExpr) -> Optional[SymExpr]:
    """Build an operator application, folding when every argument is ground.

    Returns None for the undefined outcomes (division by a ground zero,
    hd/tl of a ground empty list) and propagates None from arguments.
    """
    if any(a is None for a in args):
        return None
    if all(not is_symbolic(a) for a in args):
        return _fold(op, args)
    # Negated comparisons flip the operator so conditions read naturally.
    if op == "!" and isinstance(args[0], OpApp) and args[0].op in _COMPARISON_FLIP:
        inner = args[0]
        return OpApp(_COMPARISON_FLIP[inner.op], inner.args)
    # Ground tails of additive chains fold: (x + 1) + 2 becomes x + 3.
    if op == "+" and not is_symbolic(args[1]) and isinstance(args[0], OpApp) \
            and args[0].op == "+" and not is_symbolic(args[0].args[1]):
        folded = _fold("+", (args[0].args[1], args[1]))
        if folded is not None:
            return mk_op("+", args[0].args[0], folded)
    if op == "/" and not is_symbolic(args[1]) and args[1] == 0:
        # stays symbolic: only a fully ground division by zero is undefined
        return OpApp(op, tuple(args))
    return OpApp(op, tuple(args))


def substitute(e: SymExpr, sub: Mapping[Any, SymExpr]) -> Optional[SymExpr]:
    """Replace symbolic values/fields per ``sub``, re-folding ground results."""
    if isinstance(e, (SymVal, SymField)):
        return sub.get(e, e)
    if isinstance(e, OpApp):
        new_args = tuple(substitute(a, sub) for a in e.args)
        return mk_op(e.op, *new_args)
    if isinstance(e, tuple):
        out = tuple(substitute(a, sub) for a in e)
        if any(a is None for a in out):
            return None
        return out
    return e


def symbols_of(e: SymExpr) -> frozenset:
    """All SymVal/SymField occurrences in ``e``."""
    if isinstance(e, (SymVal, SymField)):
        return frozenset((e,))
    if isinstance(e, OpApp):
        out: frozenset = frozenset()
        for a in e.args:
            out |= symbols_of(a)
        return out
    if isinstance(e, tuple):
        out = frozenset()
        for a in e:
            out |= symbols_of(a)
        return out
    return frozenset()


_PREC = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 4,
    "<=": 4,
    ">": 4,
    ">=": 4,
    "+": 5,
    "-": 5,
    "*": 6,
    "/": 6,
}

_LEFT_ASSOC = set(_PREC)


def pretty_expr(e: SymExpr, parent_prec: int = 0, right: bool = False) -> str:
    if e is None:
        return "undefined"
    if isinstance(e, SymVal):
        return f"?{e.name}"
    if isinstance(e, SymField):
        return f"this.{e.fieldname}_{e.counter}"
    if isinstance(e, OpApp):
        op = e.op
        if op in ("len", "hd", "tl"):
            return f"{op}({pretty_expr(e.args[0])})"
        if op == "Cons":
            return f"Cons({pretty_expr(e.args[0])}, {pretty_expr(e.args[1])})"
        if op == "!":
            return f"!{pretty_expr(e.args[0], 7)}"
        if op == "neg":
            return f"-{pretty_expr(e.args[0], 7)}"
        prec = _PREC[op]
        s = f"{pretty_expr(e.args[0], prec)} {op} {pretty_expr(e.args[1], prec, right=True)}"
        if prec < parent_prec or (prec == parent_prec and right):
            return f"({s})"
        return s
    return pretty_value(e)


def expr_to_json(e: SymExpr) -> Any:
    if e is None:
        return {"undefined": True}
    if isinstance(e, SymVal):
        return {"sym": e.name, "sort": e.sort}
    if isinstance(e, SymField):
        return {"symfield": [e.fieldname, e.counter]}
    if isinstance(e, OpApp):
        return {"op": e.op, "args": [expr_to_json(a) for a in e.args]}
    return value_to_json(e)


def assert_ground(e: SymExpr, what: str = "expression"):
    if not is_sem_value(e):
        raise AssertionError(f"{what} is not ground: {pretty_expr(e)}")
