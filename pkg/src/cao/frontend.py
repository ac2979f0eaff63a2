"""Type checking, desugaring and well-formedness for parsed programs."""

from __future__ import annotations

from dataclasses import dataclass

from . import ast
from .ast import (
    Assign, Await, Bin, BoolLit, Builtin, CallStmt, FieldAcc, Get, If, IntLit,
    NeverLit, NilLit, Program, Return, Seq, Skip, Stmt, UnitLit, Un, Var,
    While, BoolT, FutT, IntT, ListT, RatT, UnitT, seq_of, stmt_list,
)
from .parser import CaoTypeError


@dataclass(frozen=True)
class RefT:
    """The type of a reference field; not denotable in source."""

    cls: str

    def __str__(self) -> str:
        return self.cls


@dataclass(frozen=True)
class AnyT:
    """Bottom-ish placeholder for expressions like hd(Nil)."""

    def __str__(self) -> str:
        return "?"


def _is_numeric(t) -> bool:
    return isinstance(t, (IntT, RatT))


def compatible(expected, actual) -> bool:
    """Structural compatibility with Int->Rat widening and Nil/Never holes."""
    if isinstance(actual, AnyT) or isinstance(expected, AnyT):
        return True
    if isinstance(expected, RatT) and isinstance(actual, IntT):
        return True
    if isinstance(expected, ListT) and isinstance(actual, ListT):
        if actual.elem is None or expected.elem is None:
            return True
        return compatible(expected.elem, actual.elem)
    if isinstance(expected, FutT) and isinstance(actual, FutT):
        if actual.elem is None or expected.elem is None:
            return True
        return compatible(expected.elem, actual.elem)
    return expected == actual


class _Env:
    def __init__(self, prog: Program, cls: ast.ClassDecl, method: ast.MethodDecl):
        self.prog = prog
        self.cls = cls
        self.method = method
        self.fields = {n: ty for n, ty, _ in cls.fields}
        self.refs = {f: RefT(cn) for f, cn in cls.refparams}
        self.params = dict(method.params)
        self.locals: dict[str, ast.DataType] = {}

    def var_type(self, name: str):
        if name in self.params:
            return self.params[name]
        if name in self.locals:
            return self.locals[name]
        return None

    def field_type(self, name: str):
        if name in self.fields:
            return self.fields[name]
        if name in self.refs:
            return self.refs[name]
        return None


def _err(msg: str):
    raise CaoTypeError(msg)


def _type_expr(e: ast.Expr, env: _Env):
    t = _infer(e, env)
    e.ty = t
    return t


def _infer(e: ast.Expr, env: _Env):
    if isinstance(e, IntLit):
        return ast.INT
    if isinstance(e, BoolLit):
        return ast.BOOL
    if isinstance(e, UnitLit):
        return ast.UNIT_T
    if isinstance(e, NilLit):
        return ListT(None)
    if isinstance(e, NeverLit):
        return FutT(None)
    if isinstance(e, Var):
        t = env.var_type(e.name)
        if t is None:
            _err(f"unknown variable {e.name!r} in {env.cls.name}.{env.method.name}")
        return t
    if isinstance(e, FieldAcc):
        t = env.field_type(e.name)
        if t is None:
            _err(f"unknown field {e.name!r} in class {env.cls.name}")
        return t
    if isinstance(e, Un):
        t = _type_expr(e.e, env)
        if e.op == "!":
            if not isinstance(t, BoolT):
                _err(f"'!' needs Bool, got {t}")
            return ast.BOOL
        if not _is_numeric(t):
            _err(f"unary '-' needs Int or Rat, got {t}")
        return t
    if isinstance(e, Builtin):
        ts = [_type_expr(a, env) for a in e.args]
        if e.op == "len":
            if not isinstance(ts[0], ListT):
                _err(f"len needs a list, got {ts[0]}")
            return ast.INT
        if e.op in ("hd", "tl"):
            if not isinstance(ts[0], ListT):
                _err(f"{e.op} needs a list, got {ts[0]}")
            if e.op == "tl":
                return ts[0]
            return ts[0].elem if ts[0].elem is not None else AnyT()
        if e.op == "Cons":
            a, l = ts
            if not isinstance(l, ListT):
                _err(f"Cons tail must be a list, got {l}")
            if l.elem is None:
                return ListT(a)
            if compatible(l.elem, a) or compatible(a, l.elem):
                return ListT(l.elem if not isinstance(l.elem, AnyT) else a)
            _err(f"Cons element {a} does not fit List<{l.elem}>")
    if isinstance(e, Bin):
        lt = _type_expr(e.l, env)
        rt = _type_expr(e.r, env)
        op = e.op
        if op in ("&&", "||"):
            if not (isinstance(lt, BoolT) and isinstance(rt, BoolT)):
                _err(f"{op} needs Bool operands, got {lt}, {rt}")
            return ast.BOOL
        if op in ("+", "-", "*"):
            if not (_is_numeric(lt) and _is_numeric(rt)):
                _err(f"{op} needs numeric operands, got {lt}, {rt}")
            if isinstance(lt, RatT) or isinstance(rt, RatT):
                return ast.RAT
            return ast.INT
        if op == "/":
            if not (_is_numeric(lt) and _is_numeric(rt)):
                _err(f"/ needs numeric operands, got {lt}, {rt}")
            return ast.RAT
        if op in ("<", "<=", ">", ">="):
            if not (_is_numeric(lt) and _is_numeric(rt)):
                _err(f"{op} needs numeric operands, got {lt}, {rt}")
            return ast.BOOL
        if op in ("==", "!="):
            if not (compatible(lt, rt) or compatible(rt, lt)):
                _err(f"{op} compares incompatible types {lt} and {rt}")
            return ast.BOOL
    raise AssertionError(e)


def _type_stmt(s: Stmt, env: _Env):
    if isinstance(s, Seq):
        _type_stmt(s.first, env)
        _type_stmt(s.rest, env)
        return
    if isinstance(s, Skip):
        return
    if isinstance(s, Assign):
        t = _type_expr(s.rhs, env)
        if isinstance(s.target, FieldAcc):
            ft = env.field_type(s.target.name)
            if ft is None:
                _err(f"unknown field {s.target.name!r}")
            if isinstance(ft, RefT):
                _err(f"reference field {s.target.name!r} cannot be reassigned")
            if not compatible(ft, t):
                _err(f"cannot assign {t} to field {s.target.name}: {ft}")
            s.target.ty = ft
            return
        _check_target(s, s.target, t, env)
        return
    if isinstance(s, Get):
        ft = _type_expr(s.fut, env)
        if not isinstance(ft, FutT):
            _err(f"get needs a future, got {ft}")
        vt = ft.elem if ft.elem is not None else AnyT()
        _check_target(s, s.target, vt, env)
        return
    if isinstance(s, CallStmt):
        rt = env.field_type(s.callee)
        if not isinstance(rt, RefT):
            _err(f"call target {s.callee!r} is not a reference field of {env.cls.name}")
        try:
            md = env.prog.method_decl(rt.cls, s.method)
        except KeyError:
            _err(f"class {rt.cls} has no method {s.method!r}")
        if len(md.params) != len(s.args):
            _err(f"{rt.cls}.{s.method} expects {len(md.params)} arguments, got {len(s.args)}")
        for (pn, pt), a in zip(md.params, s.args):
            at = _type_expr(a, env)
            if not compatible(pt, at):
                _err(f"argument {pn} of {rt.cls}.{s.method}: expected {pt}, got {at}")
        _check_target(s, s.target, FutT(md.ret), env)
        return
    if isinstance(s, Await):
        gt = _type_expr(s.guard, env)
        if s.is_future:
            if not isinstance(gt, FutT):
                _err(f"await guard 'e?' needs a future, got {gt}")
        elif not isinstance(gt, BoolT):
            _err(f"await guard needs Bool, got {gt}")
        return
    if isinstance(s, Return):
        t = _type_expr(s.e, env)
        if not compatible(env.method.ret, t):
            _err(f"return type mismatch in {env.cls.name}.{env.method.name}: "
                 f"expected {env.method.ret}, got {t}")
        return
    if isinstance(s, If):
        ct = _type_expr(s.cond, env)
        if not isinstance(ct, BoolT):
            _err(f"if condition needs Bool, got {ct}")
        _type_stmt(s.then, env)
        if s.els is not None:
            _type_stmt(s.els, env)
        return
    if isinstance(s, While):
        ct = _type_expr(s.cond, env)
        if not isinstance(ct, BoolT):
            _err(f"while condition needs Bool, got {ct}")
        _type_stmt(s.body, env)
        return
    raise AssertionError(s)


def _check_target(s, target: Var, t, env: _Env):
    name = target.name
    if name in env.params:
        _err(f"parameter {name!r} cannot be reassigned")
    if s.decl is not None:
        if not compatible(s.decl, t):
            _err(f"cannot initialize {s.decl} {name} with {t}")
        target.ty = s.decl
        return
    if name not in env.locals:
        _err(f"unknown variable {name!r}")
    vt = env.locals[name]
    if not compatible(vt, t):
        _err(f"cannot assign {t} to {vt} {name}")
    target.ty = vt


def _check_decl_order(m: ast.MethodDecl, params: set):
    """Locals may only be mentioned after their declaration (pre-order)."""
    declared: set[str] = set(params)

    def vars_of(e: ast.Expr):
        if isinstance(e, Var):
            yield e.name
        elif isinstance(e, Un):
            yield from vars_of(e.e)
        elif isinstance(e, Bin):
            yield from vars_of(e.l)
            yield from vars_of(e.r)
        elif isinstance(e, Builtin):
            for a in e.args:
                yield from vars_of(a)

    def check_exprs(*es):
        for e in es:
            for v in vars_of(e):
                if v not in declared:
                    _err(f"variable {v!r} used before its declaration in {m.name}")

    def walk(s: Stmt):
        for st in stmt_list(s):
            if isinstance(st, Assign):
                check_exprs(st.rhs)
                if isinstance(st.target, Var):
                    _note(st, st.target.name)
            elif isinstance(st, Get):
                check_exprs(st.fut)
                _note(st, st.target.name)
            elif isinstance(st, CallStmt):
                check_exprs(*st.args)
                _note(st, st.target.name)
            elif isinstance(st, (Await,)):
                check_exprs(st.guard)
            elif isinstance(st, Return):
                check_exprs(st.e)
            elif isinstance(st, If):
                check_exprs(st.cond)
                walk(st.then)
                if st.els is not None:
                    walk(st.els)
            elif isinstance(st, While):
                check_exprs(st.cond)
                walk(st.body)

    def _note(st, name: str):
        if st.decl is not None:
            declared.add(name)
        elif name not in declared:
            _err(f"variable {name!r} assigned before its declaration in {m.name}")

    walk(m.body)


def collect_locals(m: ast.MethodDecl) -> dict:
    """All declared locals of a method (domain of its local states)."""
    out: dict[str, ast.DataType] = {}

    def walk(s: Stmt):
        for st in stmt_list(s):
            if isinstance(st, (Assign, Get, CallStmt)) and st.decl is not None:
                out[st.target.name] = st.decl
            if isinstance(st, If):
                walk(st.then)
                if st.els is not None:
                    walk(st.els)
            if isinstance(st, While):
                walk(st.body)

    walk(m.body)
    return out


def typecheck(prog: Program) -> Program:
    """Annotate every expression with its data type; raise CaoTypeError."""
    classnames = {c.name for c in prog.classes}
    for c in prog.classes:
        for f, cn in c.refparams:
            if cn not in classnames:
                _err(f"reference field {f}: unknown class {cn}")
        for name, ty, init in c.fields:
            env = _Env(prog, c, ast.MethodDecl(ast.UNIT_T, "<init>", [], Skip()))
            t = _type_expr(init, env)
            if not compatible(ty, t):
                _err(f"field {c.name}.{name}: initializer has type {t}, expected {ty}")
        for m in c.methods:
            env = _Env(prog, c, m)
            # locals are collected up front: the domain of a local state is
            # fixed; a separate pre-order pass enforces declaration order.
            env.locals = collect_locals(m)
            _check_decl_order(m, set(env.params))
            _type_stmt(m.body, env)
    _check_main(prog)
    return prog


def _check_main(prog: Program):
    created = {}
    for cr in prog.main.creations:
        try:
            cd = prog.class_decl(cr.cls)
        except KeyError:
            _err(f"main: unknown class {cr.cls}")
        created[cr.var] = cd
    for cr in prog.main.creations:
        cd = created[cr.var]
        if len(cr.args) != len(cd.refparams):
            _err(f"main: {cr.cls}({', '.join(cr.args)}) expects "
                 f"{len(cd.refparams)} reference(s)")
        for a, (f, cn) in zip(cr.args, cd.refparams):
            if a not in created:
                _err(f"main: unknown object {a!r} in creation of {cr.var}")
            if created[a].name != cn:
                _err(f"main: reference {f} of {cr.cls} needs {cn}, got {created[a].name}")
    tgt = prog.main.call_target
    if tgt not in created:
        _err(f"main: call target {tgt!r} was not created")
    try:
        md = prog.method_decl(created[tgt].name, prog.main.call_method)
    except KeyError:
        _err(f"main: {created[tgt].name} has no method {prog.main.call_method!r}")
    if len(md.params) != len(prog.main.call_args):
        _err(f"main: {prog.main.call_method} expects {len(md.params)} arguments")
    dummy = _Env(prog, created[tgt], ast.MethodDecl(ast.UNIT_T, "<main>", [], Skip()))
    dummy.fields = {}
    dummy.refs = {}
    for (pn, pt), a in zip(md.params, prog.main.call_args):
        at = _type_expr(a, dummy)
        if not compatible(pt, at):
            _err(f"main: argument {pn}: expected {pt}, got {at}")


# ------------------------------------------------------------------- desugar


def _ends_in_skip(s: Stmt) -> bool:
    return isinstance(stmt_list(s)[-1], Skip)


def _desugar_stmt(s: Stmt) -> Stmt:
    if isinstance(s, Seq):
        return seq_of([_desugar_stmt(x) for x in stmt_list(s)])
    if isinstance(s, If):
        then = _desugar_stmt(s.then)
        if not _ends_in_skip(then):
            then = seq_of(stmt_list(then) + [Skip()])
        els = _desugar_stmt(s.els) if s.els is not None else Skip()
        if not _ends_in_skip(els):
            els = seq_of(stmt_list(els) + [Skip()])
        return If(s.cond, then, els)
    if isinstance(s, While):
        body = _desugar_stmt(s.body)
        if not _ends_in_skip(body):
            body = seq_of(stmt_list(body) + [Skip()])
        return While(s.cond, body, s.pp)
    return s


def desugar(prog: Program) -> Program:
    """Append `skip` to branch/loop bodies and insert empty else branches."""
    classes = []
    for c in prog.classes:
        methods = [ast.MethodDecl(m.ret, m.name, m.params, _desugar_stmt(m.body))
                   for m in c.methods]
        classes.append(ast.ClassDecl(c.name, c.refparams, c.fields, methods))
    return Program(classes, prog.main)


# ------------------------------------------------------------ well-formedness


def check_wellformed(prog: Program):
    """Assert the structural constraints of a checked, desugared program."""
    for c, m in prog.methods():
        top = stmt_list(m.body)
        returns = [st for st in _walk(m.body) if isinstance(st, Return)]
        if len(returns) != 1 or not isinstance(top[-1], Return):
            raise CaoTypeError(
                f"{c.name}.{m.name}: exactly one return required, as the last statement")
        for st in _walk(m.body):
            if isinstance(st, If):
                if st.els is None or not _ends_in_skip(st.then) or not _ends_in_skip(st.els):
                    raise CaoTypeError(f"{c.name}.{m.name}: branch does not end in skip")
            if isinstance(st, While) and not _ends_in_skip(st.body):
                raise CaoTypeError(f"{c.name}.{m.name}: loop body does not end in skip")
    pps = [st.pp for st in _all_program_points(prog)]
    if len(pps) != len(set(pps)) or any(p is None for p in pps):
        raise CaoTypeError("program-point identifiers must be assigned and unique")


def _walk(s: Stmt):
    for st in stmt_list(s):
        yield st
        if isinstance(st, If):
            yield from _walk(st.then)
            if st.els is not None:
                yield from _walk(st.els)
        if isinstance(st, While):
            yield from _walk(st.body)


def _all_program_points(prog: Program):
    for _, m in prog.methods():
        for st in _walk(m.body):
            if isinstance(st, (Get, Await, While)):
                yield st


def load_program(src: str, filename: str = "<input>") -> Program:
    """parse + typecheck + desugar + well-formedness, in order."""
    from .parser import parse

    prog = parse(src, filename)
    typecheck(prog)
    prog = desugar(prog)
    typecheck(prog)  # re-annotate rebuilt nodes
    check_wellformed(prog)
    return prog
