"""Behavioral method types: protocol terms, normalization rewrites, and the
``.btype`` specification file format.

A specification file declares assumption predicates, role bindings, per-method
protocols, loop invariants, contracts and class invariants:

    assume phi_cmp, phi_log;
    roles S -> this.S, L -> this.L;
    type T.test : ?test(true) . S!Comp.cmp(data = i)
                  . &({Comp.cmp}, result < 0){ L!Log.log(data = i), skip }
                  . down(result >= 0);
    invariant at loop 3 : n >= 0;
    contract T.test : pre i >= 0 post result >= 0;
    classinv T : this.nr >= 0;
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Any, Optional

from . import ast
from .fos import CaoLogicError, FBool
from .logic_parser import LogicParser


@dataclass(frozen=True)
class SkipT:
    def __repr__(self) -> str:
        return "skip"


@dataclass(frozen=True)
class CallAct:
    role: str
    method: str  # qualified C.m
    phi: Any

    def __repr__(self) -> str:
        from .fos import pretty_fos

        return f"{self.role}!{self.method}({pretty_fos(self.phi)})"


@dataclass(frozen=True)
class DownAct:
    phi: Any

    def __repr__(self) -> str:
        from .fos import pretty_fos

        return f"down({pretty_fos(self.phi)})"


@dataclass(frozen=True)
class SeqT:
    l: Any
    r: Any

    def __repr__(self) -> str:
        return f"{self.l!r} . {self.r!r}"


@dataclass(frozen=True)
class StarT:
    body: Any

    def __repr__(self) -> str:
        return f"({self.body!r})*"


@dataclass(frozen=True)
class ChoiceT:
    """Active choice: the method selects one branch."""

    branches: tuple

    def __post_init__(self):
        if not self.branches:
            raise ValueError("active choice must not be empty")

    def __repr__(self) -> str:
        return "+{" + ", ".join(repr(b) for b in self.branches) + "}"


@dataclass(frozen=True)
class PassiveT:
    """Passive choice: a read future's value dictates the branch. The
    condition may only mention ``result``."""

    methods: tuple
    phi: Any
    left: Any
    right: Any

    def __repr__(self) -> str:
        from .fos import pretty_fos

        ms = ", ".join(self.methods)
        return f"&({{{ms}}}, {pretty_fos(self.phi)}){{{self.left!r}, {self.right!r}}}"


LType = Any


@dataclass(frozen=True)
class Protocol:
    method: str  # qualified
    pre: Any
    body: LType

    def __repr__(self) -> str:
        from .fos import pretty_fos

        m = self.method.split(".")[1]
        return f"?{m}({pretty_fos(self.pre)}) . {self.body!r}"


def seq_of(items) -> LType:
    items = list(items)
    if not items:
        return SkipT()
    out = items[-1]
    for x in reversed(items[:-1]):
        out = SeqT(x, out)
    return out


def seq_list(L) -> list:
    if isinstance(L, SeqT):
        return seq_list(L.l) + seq_list(L.r)
    return [L]


def normalize(L: LType) -> LType:
    """skip.L <-> L, L.skip <-> L, singleton active choice collapses;
    applied bottom-up to a fixpoint."""
    if isinstance(L, SeqT):
        l, r = normalize(L.l), normalize(L.r)
        if isinstance(l, SkipT):
            return r
        if isinstance(r, SkipT):
            return l
        return SeqT(l, r)
    if isinstance(L, StarT):
        return StarT(normalize(L.body))
    if isinstance(L, ChoiceT):
        bs = tuple(normalize(b) for b in L.branches)
        if len(bs) == 1:
            return bs[0]
        return ChoiceT(bs)
    if isinstance(L, PassiveT):
        return PassiveT(L.methods, L.phi, normalize(L.left), normalize(L.right))
    return L


def distribute_head(L: LType) -> LType:
    """Push a sequential continuation into choice branches so the calculus
    can match the head construct; preserves the trace semantics."""
    L = normalize(L)
    if isinstance(L, SeqT):
        head = distribute_head(L.l)
        if isinstance(head, ChoiceT):
            return ChoiceT(tuple(normalize(SeqT(b, L.r)) for b in head.branches))
        if isinstance(head, PassiveT):
            return PassiveT(head.methods, head.phi,
                            normalize(SeqT(head.left, L.r)),
                            normalize(SeqT(head.right, L.r)))
        if isinstance(head, SeqT):
            return SeqT(head.l, normalize(SeqT(head.r, L.r)))
        return SeqT(head, L.r)
    return L


# --------------------------------------------------------------- .btype files


@dataclass
class BtypeFile:
    roles: dict = dc_field(default_factory=dict)  # role -> field
    types: dict = dc_field(default_factory=dict)  # qualified method -> Protocol
    invariants: dict = dc_field(default_factory=dict)  # loop pp -> FOS
    contracts: dict = dc_field(default_factory=dict)  # method -> (pre, post)
    classinvs: dict = dc_field(default_factory=dict)  # class -> FOS
    getposts: dict = dc_field(default_factory=dict)  # get pp -> (method, FOS)
    assumes: frozenset = frozenset()


class _BtypeParser(LogicParser):
    def __init__(self, src: str, program: Optional[ast.Program],
                 filename: str, assumed: frozenset):
        super().__init__(src, program, filename, assumed)

    def qualified(self) -> str:
        name = self.ident()
        if self.accept("."):
            name = f"{name}.{self.ident()}"
        return self.method_const(name)

    def phi(self):
        self.expect("(")
        if self.peek().text == ")":
            self.next()
            return FBool(True)
        f = self.fos_formula()
        self.expect(")")
        return f

    def ltype(self):
        items = [self.ltype_item()]
        while self.accept("."):
            items.append(self.ltype_item())
        return seq_of(items)

    def ltype_item(self):
        t = self.ltype_prim()
        while self.accept("*"):
            t = StarT(t)
        return t

    def ltype_prim(self):
        t = self.peek()
        if t.text == "skip":
            self.next()
            return SkipT()
        if t.text == "down":
            self.next()
            return DownAct(self.phi())
        if t.text == "(":
            self.next()
            inner = self.ltype()
            self.expect(")")
            return inner
        if t.text == "+":
            self.next()
            self.expect("{")
            branches = [self.ltype()]
            while self.accept(","):
                branches.append(self.ltype())
            self.expect("}")
            return ChoiceT(tuple(branches))
        if t.text == "&":
            self.next()
            self.expect("(")
            self.expect("{")
            methods = [self.qualified()]
            while self.accept(","):
                methods.append(self.qualified())
            self.expect("}")
            self.expect(",")
            f = self.fos_formula()
            self.expect(")")
            self.expect("{")
            left = self.ltype()
            self.expect(",")
            right = self.ltype()
            self.expect("}")
            return PassiveT(tuple(methods), f, left, right)
        if t.kind == "id":
            role = self.ident()
            self.expect("!")
            meth = self.qualified()
            return CallAct(role, meth, self.phi())
        self.err(f"expected a protocol item, found {t.text!r}")


def parse_btype(src: str, program: Optional[ast.Program] = None,
                filename: str = "<btype>") -> BtypeFile:
    # assumption names must be known before formulas parse
    assumes: set = set()
    scan = _BtypeParser(src, program, filename, frozenset())
    while scan.peek().kind != "eof":
        if scan.peek().text == "assume":
            scan.next()
            assumes.add(scan.ident())
            while scan.accept(","):
                assumes.add(scan.ident())
        else:
            scan.next()

    p = _BtypeParser(src, program, filename, frozenset(assumes))
    out = BtypeFile(assumes=frozenset(assumes))
    while p.peek().kind != "eof":
        t = p.peek()
        if t.text == "assume":
            p.next()
            p.ident()
            while p.accept(","):
                p.ident()
            p.expect(";")
        elif t.text == "roles":
            p.next()
            while True:
                role = p.ident()
                p.expect("->")
                p.expect("this")
                p.expect(".")
                out.roles[role] = p.ident()
                if not p.accept(","):
                    break
            p.expect(";")
        elif t.text == "type":
            p.next()
            meth = p.qualified()
            p.expect(":")
            p.expect("?")
            short = p.ident()
            if short != meth.split(".")[1]:
                p.err(f"receive action names {short!r}, type is for {meth}")
            pre = p.phi()
            p.expect(".")
            body = p.ltype()
            p.expect(";")
            out.types[meth] = Protocol(meth, pre, body)
        elif t.text == "invariant":
            p.next()
            p.expect("at")
            p.expect("loop")
            n = p.peek()
            if n.kind != "int":
                p.err("expected a loop program point")
            p.next()
            p.expect(":")
            f = p.fos_formula()
            p.expect(";")
            out.invariants[int(n.text)] = f
        elif t.text == "contract":
            p.next()
            meth = p.qualified()
            p.expect(":")
            p.expect("pre")
            pre = p.fos_formula()
            p.expect("post")
            post = p.fos_formula()
            p.expect(";")
            out.contracts[meth] = (pre, post)
        elif t.text == "classinv":
            p.next()
            cls = p.ident()
            p.expect(":")
            f = p.fos_formula()
            p.expect(";")
            out.classinvs[cls] = f
        elif t.text == "getpost":
            p.next()
            p.expect("at")
            p.expect("get")
            n = p.peek()
            if n.kind != "int":
                p.err("expected a get program point")
            p.next()
            p.expect("from")
            meth = p.qualified()
            p.expect(":")
            f = p.fos_formula()
            p.expect(";")
            out.getposts[int(n.text)] = (meth, f)
        else:
            p.err(f"unknown directive {t.text!r}")
    return out


def role_binding(btype: BtypeFile, program: ast.Program, method: str) -> dict:
    """role -> field restricted to fields of the typed method's class."""
    cls, _ = program.resolve_method(method)
    fields = {f for f, _cn in cls.refparams}
    return {r: f for r, f in btype.roles.items() if f in fields}
