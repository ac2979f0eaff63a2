"""AST for CAO programs: data types, expressions, statements, declarations.

Expression and statement nodes compare structurally; the inferred type of an
expression is attached in-place by the checker and excluded from equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .values import NEVER, UNIT


# ---------------------------------------------------------------- data types


@dataclass(frozen=True)
class IntT:
    def __str__(self) -> str:
        return "Int"


@dataclass(frozen=True)
class RatT:
    def __str__(self) -> str:
        return "Rat"


@dataclass(frozen=True)
class BoolT:
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class UnitT:
    def __str__(self) -> str:
        return "Unit"


@dataclass(frozen=True)
class ListT:
    elem: "DataType | None"  # None: element type not yet determined (Nil)

    def __str__(self) -> str:
        return f"List<{self.elem if self.elem is not None else '?'}>"


@dataclass(frozen=True)
class FutT:
    elem: "DataType | None"  # None: Never without context

    def __str__(self) -> str:
        return f"Fut<{self.elem if self.elem is not None else '?'}>"


DataType = Union[IntT, RatT, BoolT, UnitT, ListT, FutT]

INT, RAT, BOOL, UNIT_T = IntT(), RatT(), BoolT(), UnitT()


def default_value(ty: DataType):
    """The creation-time default of a data type."""
    if isinstance(ty, IntT):
        return 0
    if isinstance(ty, RatT):
        return Fraction(0)
    if isinstance(ty, BoolT):
        return False
    if isinstance(ty, UnitT):
        return UNIT
    if isinstance(ty, ListT):
        return ()
    if isinstance(ty, FutT):
        return NEVER
    raise AssertionError(f"no default for {ty}")


# --------------------------------------------------------------- expressions


@dataclass(eq=True)
class Expr:
    pass


@dataclass(eq=True)
class IntLit(Expr):
    value: int
    ty: Optional[DataType] = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class BoolLit(Expr):
    value: bool
    ty: Optional[DataType] = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class NilLit(Expr):
    ty: Optional[DataType] = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class NeverLit(Expr):
    ty: Optional[DataType] = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class UnitLit(Expr):
    ty: Optional[DataType] = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class Var(Expr):
    name: str
    ty: Optional[DataType] = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class FieldAcc(Expr):
    """``this.f``"""

    name: str
    ty: Optional[DataType] = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class Un(Expr):
    op: str  # "!" | "neg"
    e: Expr
    ty: Optional[DataType] = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class Bin(Expr):
    op: str
    l: Expr
    r: Expr
    ty: Optional[DataType] = field(default=None, compare=False, repr=False)


@dataclass(eq=True)
class Builtin(Expr):
    """len/hd/tl/Cons applications."""

    op: str
    args: list
    ty: Optional[DataType] = field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------- statements


@dataclass(eq=True)
class Stmt:
    pass


@dataclass(eq=True)
class Skip(Stmt):
    pass


@dataclass(eq=True)
class Assign(Stmt):
    """``[D] l = e`` where l is a variable or ``this.f``."""

    decl: Optional[DataType]
    target: Expr  # Var | FieldAcc
    rhs: Expr


@dataclass(eq=True)
class Get(Stmt):
    """``[D] v = e.get_i``"""

    decl: Optional[DataType]
    target: Var
    fut: Expr
    pp: Optional[int]


@dataclass(eq=True)
class CallStmt(Stmt):
    """``[D] v = f!m(es)`` — f is a reference field (or creation in main)."""

    decl: Optional[DataType]
    target: Var
    callee: str
    method: str
    args: list


@dataclass(eq=True)
class Await(Stmt):
    guard: Expr
    is_future: bool  # True for "await e?"
    pp: Optional[int]


@dataclass(eq=True)
class Return(Stmt):
    e: Expr


@dataclass(eq=True)
class If(Stmt):
    cond: Expr
    then: Stmt
    els: Optional[Stmt]


@dataclass(eq=True)
class While(Stmt):
    cond: Expr
    body: Stmt
    pp: Optional[int] = None


@dataclass(eq=True)
class Seq(Stmt):
    first: Stmt
    rest: Stmt


def seq_of(stmts: list) -> Stmt:
    if not stmts:
        return Skip()
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def stmt_list(s: Stmt) -> list:
    if isinstance(s, Seq):
        return stmt_list(s.first) + stmt_list(s.rest)
    return [s]


# -------------------------------------------------------------- declarations


@dataclass(eq=True)
class MethodDecl:
    ret: DataType
    name: str
    params: list  # [(name, DataType)]
    body: Stmt


@dataclass(eq=True)
class ClassDecl:
    name: str
    refparams: list  # [(field, classname)] — non-reassignable references
    fields: list  # [(name, DataType, Expr)]
    methods: list


@dataclass(eq=True)
class Creation:
    var: str
    cls: str
    args: list  # creation variable names


@dataclass(eq=True)
class MainBlock:
    creations: list
    call_target: str
    call_method: str
    call_args: list  # exprs, ground data


@dataclass(eq=True)
class Program:
    classes: list
    main: MainBlock

    def class_decl(self, name: str) -> ClassDecl:
        for c in self.classes:
            if c.name == name:
                return c
        raise KeyError(name)

    def method_decl(self, clsname: str, m: str) -> MethodDecl:
        for md in self.class_decl(clsname).methods:
            if md.name == m:
                return md
        raise KeyError(f"{clsname}.{m}")

    def methods(self):
        for c in self.classes:
            for m in c.methods:
                yield c, m

    def qualified_methods(self) -> list:
        return [f"{c.name}.{m.name}" for c, m in self.methods()]

    def resolve_method(self, name: str) -> tuple:
        """Resolve 'C.m' or a unique bare 'm' to (ClassDecl, MethodDecl)."""
        if "." in name:
            cn, mn = name.split(".", 1)
            return self.class_decl(cn), self.method_decl(cn, mn)
        hits = [(c, m) for c, m in self.methods() if m.name == name]
        if len(hits) != 1:
            raise KeyError(f"method name {name!r} is {'ambiguous' if hits else 'unknown'}")
        return hits[0]

    def program_points(self) -> dict:
        """pp -> (kind, node) for every get/await/while in the program."""
        cached = getattr(self, "_pp_cache", None)
        if cached is not None:
            return cached
        out: dict[int, tuple] = {}

        def walk(s: Stmt):
            if isinstance(s, Seq):
                walk(s.first)
                walk(s.rest)
            elif isinstance(s, Get):
                out[s.pp] = ("get", s)
            elif isinstance(s, Await):
                out[s.pp] = ("await", s)
            elif isinstance(s, If):
                walk(s.then)
                if s.els is not None:
                    walk(s.els)
            elif isinstance(s, While):
                out[s.pp] = ("while", s)
                walk(s.body)

        for _, m in self.methods():
            walk(m.body)
        self._pp_cache = out
        return out


# ------------------------------------------------------------ pretty printer


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


def print_expr(e: Expr, parent: int = 0, right: bool = False) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "True" if e.value else "False"
    if isinstance(e, NilLit):
        return "Nil"
    if isinstance(e, NeverLit):
        return "Never"
    if isinstance(e, UnitLit):
        return "unit"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, FieldAcc):
        return f"this.{e.name}"
    if isinstance(e, Un):
        return ("!" if e.op == "!" else "-") + print_expr(e.e, 7)
    if isinstance(e, Builtin):
        return f"{e.op}(" + ", ".join(print_expr(a) for a in e.args) + ")"
    if isinstance(e, Bin):
        p = _PREC[e.op]
        s = f"{print_expr(e.l, p)} {e.op} {print_expr(e.r, p, right=True)}"
        return f"({s})" if p < parent or (p == parent and right) else s
    raise AssertionError(e)


def _print_stmt(s: Stmt, ind: str, out: list):
    if isinstance(s, Seq):
        _print_stmt(s.first, ind, out)
        _print_stmt(s.rest, ind, out)
        return
    if isinstance(s, Skip):
        out.append(f"{ind}skip;")
    elif isinstance(s, Assign):
        d = f"{s.decl} " if s.decl is not None else ""
        out.append(f"{ind}{d}{print_expr(s.target)} = {print_expr(s.rhs)};")
    elif isinstance(s, Get):
        d = f"{s.decl} " if s.decl is not None else ""
        pp = f"_{s.pp}" if s.pp is not None else ""
        out.append(f"{ind}{d}{s.target.name} = {print_expr(s.fut)}.get{pp};")
    elif isinstance(s, CallStmt):
        d = f"{s.decl} " if s.decl is not None else ""
        args = ", ".join(print_expr(a) for a in s.args)
        out.append(f"{ind}{d}{s.target.name} = {s.callee}!{s.method}({args});")
    elif isinstance(s, Await):
        pp = f"_{s.pp}" if s.pp is not None else ""
        g = print_expr(s.guard) + ("?" if s.is_future else "")
        out.append(f"{ind}await{pp} {g};")
    elif isinstance(s, Return):
        out.append(f"{ind}return {print_expr(s.e)};")
    elif isinstance(s, If):
        out.append(f"{ind}if({print_expr(s.cond)}){{")
        _print_stmt(s.then, ind + "    ", out)
        if s.els is not None:
            out.append(f"{ind}}}else{{")
            _print_stmt(s.els, ind + "    ", out)
        out.append(f"{ind}}}")
    elif isinstance(s, While):
        out.append(f"{ind}while({print_expr(s.cond)}){{")
        _print_stmt(s.body, ind + "    ", out)
        out.append(f"{ind}}}")
    else:
        raise AssertionError(s)


def print_program(p: Program) -> str:
    out: list[str] = []
    for c in p.classes:
        rp = ", ".join(f"{cn} {f}" for f, cn in c.refparams)
        out.append(f"class {c.name}({rp}){{")
        for name, ty, init in c.fields:
            out.append(f"    {ty} {name} = {print_expr(init)};")
        for m in c.methods:
            ps = ", ".join(f"{ty} {n}" for n, ty in m.params)
            out.append(f"    {m.ret} {m.name}({ps}){{")
            _print_stmt(m.body, "        ", out)
            out.append("    }")
        out.append("}")
    out.append("main{")
    for cr in p.main.creations:
        out.append(f"    {cr.cls} {cr.var} = {cr.cls}({', '.join(cr.args)});")
    args = ", ".join(print_expr(a) for a in p.main.call_args)
    out.append(f"    {p.main.call_target}!{p.main.call_method}({args});")
    out.append("}")
    return "\n".join(out) + "\n"
