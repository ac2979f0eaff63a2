"""Semantic values and small immutable containers shared across the workbench.

A semantic value is one of: the unit value, a bool, an arbitrary-precision
int, an exact rational, a finite (homogeneous) tuple of semantic values, an
object name, or a future identity (including the distinguished unresolvable
future ``Never``).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator, Mapping


@dataclass(frozen=True)
class UnitVal:
    def __repr__(self) -> str:
        return "unit"


@dataclass(frozen=True)
class ObjRef:
    """A created object's identity; named after its main-block variable."""

    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class FutId:
    """A concrete future identity, issued in global creation order."""

    id: int

    def __repr__(self) -> str:
        return f"fut{self.id}"


@dataclass(frozen=True)
class NeverFut:
    """The future that is never resolved."""

    def __repr__(self) -> str:
        return "Never"


UNIT = UnitVal()
NEVER = NeverFut()

# bool must be tested before int: bool is a subclass of int in Python.
_SCALARS = (bool, int, Fraction, UnitVal, ObjRef, FutId, NeverFut)


def is_sem_value(x: Any) -> bool:
    """True iff ``x`` is a ground semantic value (sequences checked deeply)."""
    if isinstance(x, tuple):
        return all(is_sem_value(e) for e in x)
    return isinstance(x, _SCALARS)


def pretty_value(v: Any) -> str:
    if isinstance(v, bool):
        return "True" if v else "False"
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, tuple):
        return "[" + ", ".join(pretty_value(e) for e in v) + "]"
    return repr(v)


def value_to_json(v: Any) -> Any:
    if isinstance(v, bool):
        return v
    if isinstance(v, int):
        return v
    if isinstance(v, Fraction):
        return {"rat": [v.numerator, v.denominator]}
    if isinstance(v, UnitVal):
        return {"unit": True}
    if isinstance(v, ObjRef):
        return {"obj": v.name}
    if isinstance(v, FutId):
        return {"fut": v.id}
    if isinstance(v, NeverFut):
        return {"fut": "never"}
    if isinstance(v, tuple):
        return {"seq": [value_to_json(e) for e in v]}
    raise TypeError(f"not a semantic value: {v!r}")


class FMap(Mapping[str, Any]):
    """An immutable, hashable string-keyed map with deterministic iteration."""

    __slots__ = ("_items", "_hash")

    def __init__(self, items: Mapping[str, Any] | Iterator | None = None, **kw: Any):
        d: dict[str, Any] = {}
        if items is not None:
            d.update(items)
        d.update(kw)
        object.__setattr__(self, "_items", tuple(sorted(d.items())))
        object.__setattr__(self, "_hash", hash(self._items))

    def __getitem__(self, k: str) -> Any:
        for key, v in self._items:
            if key == k:
                return v
        raise KeyError(k)

    def __iter__(self):
        return iter(k for k, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FMap):
            return self._items == other._items
        return NotImplemented

    def __repr__(self) -> str:
        return "FMap({" + ", ".join(f"{k!r}: {v!r}" for k, v in self._items) + "})"

    def set(self, k: str, v: Any) -> "FMap":
        d = dict(self._items)
        d[k] = v
        return FMap(d)

    def update(self, other: Mapping[str, Any]) -> "FMap":
        d = dict(self._items)
        d.update(other)
        return FMap(d)

    def items(self):
        return self._items
