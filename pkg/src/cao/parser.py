"""Recursive-descent parser for CAO source text.

Grammar notes beyond the core language:
  * ``//`` line comments;
  * get/await program points are written ``f.get_3`` / ``await_3 g`` and are
    auto-assigned (pre-order, skipping used ids) when absent;
  * loops always receive an auto-assigned program point (reports and loop
    invariant annotations refer to it).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import ast
from .ast import (
    Assign, Await, Bin, BoolLit, Builtin, CallStmt, ClassDecl, Creation,
    FieldAcc, Get, If, IntLit, MainBlock, MethodDecl, NeverLit, NilLit,
    Program, Return, Seq, Skip, Stmt, UnitLit, Un, Var, While, seq_of,
)


class CaoError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0, filename: str = "<input>"):
        self.msg, self.line, self.col, self.filename = msg, line, col, filename
        super().__init__(f"{filename}:{line}:{col}: {msg}")


class CaoSyntaxError(CaoError):
    pass


class CaoTypeError(CaoError):
    pass


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>&&|\|\||==|!=|<=|>=|[!<>=+\-*/(){},;.?])
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "class", "main", "skip", "return", "await", "while", "if", "else",
    "True", "False", "Nil", "Never", "unit", "len", "hd", "tl", "Cons",
    "Rat", "Unit", "Int", "List", "Bool", "Fut", "this", "get",
}


@dataclass
class Tok:
    kind: str  # "int" | "id" | "punct" | "eof"
    text: str
    line: int
    col: int


def tokenize(src: str, filename: str = "<input>") -> list:
    toks: list[Tok] = []
    line, col, pos = 1, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise CaoSyntaxError(f"unexpected character {src[pos]!r}", line, col, filename)
        text = m.group(0)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(Tok(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    toks.append(Tok("eof", "", line, col))
    return toks


_AWAIT_PP = re.compile(r"^await_(\d+)$")
_GET_PP = re.compile(r"^get_(\d+)$")


class Parser:
    def __init__(self, src: str, filename: str = "<input>"):
        self.toks = tokenize(src, filename)
        self.i = 0
        self.filename = filename

    # ---- token helpers

    def peek(self, k: int = 0) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def err(self, msg: str, tok: Tok | None = None):
        t = tok or self.peek()
        raise CaoSyntaxError(msg, t.line, t.col, self.filename)

    def expect(self, text: str) -> Tok:
        t = self.peek()
        if t.text != text:
            self.err(f"expected {text!r}, found {t.text!r}")
        return self.next()

    def accept(self, text: str) -> bool:
        if self.peek().text == text:
            self.next()
            return True
        return False

    def ident(self, what: str = "identifier") -> str:
        t = self.peek()
        if t.kind != "id":
            self.err(f"expected {what}, found {t.text!r}")
        return self.next().text

    # ---- entry point

    def parse_program(self) -> Program:
        classes = []
        while self.peek().text == "class":
            classes.append(self.parse_class())
        if self.peek().text != "main":
            self.err("expected 'main' block")
        main = self.parse_main()
        if self.peek().kind != "eof":
            self.err("trailing input after main block")
        prog = Program(classes, main)
        _assign_program_points(prog, self)
        _check_unique_names(prog, self)
        return prog

    def parse_class(self) -> ClassDecl:
        self.expect("class")
        name = self.ident("class name")
        self.expect("(")
        refparams = []
        if self.peek().text != ")":
            while True:
                cn = self.ident("class name")
                fn = self.ident("reference field name")
                refparams.append((fn, cn))
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect("{")
        fields, methods = [], []
        while self.peek().text != "}":
            save = self.i
            ty = self.parse_type(allow_class=False)
            name2 = self.ident("member name")
            if self.peek().text == "=":
                self.next()
                init = self.parse_expr()
                self.expect(";")
                fields.append((name2, ty, init))
            elif self.peek().text == "(":
                self.i = save
                methods.append(self.parse_method())
            else:
                self.err("expected field initializer or method parameter list")
        self.expect("}")
        return ClassDecl(name, refparams, fields, methods)

    def parse_method(self) -> MethodDecl:
        ret = self.parse_type(allow_class=False)
        name = self.ident("method name")
        self.expect("(")
        params = []
        if self.peek().text != ")":
            while True:
                ty = self.parse_type(allow_class=False)
                pn = self.ident("parameter name")
                params.append((pn, ty))
                if not self.accept(","):
                    break
        self.expect(")")
        body = self.parse_block()
        return MethodDecl(ret, name, params, body)

    def parse_main(self) -> MainBlock:
        self.expect("main")
        self.expect("{")
        creations = []
        call = None
        while self.peek().text != "}":
            if self.peek(1).text == "!":
                target = self.ident()
                self.expect("!")
                meth = self.ident("method name")
                self.expect("(")
                args = []
                if self.peek().text != ")":
                    while True:
                        args.append(self.parse_expr())
                        if not self.accept(","):
                            break
                self.expect(")")
                self.accept(";")
                call = (target, meth, args)
                break
            cls = self.ident("class name")
            var = self.ident("variable name")
            self.expect("=")
            cls2 = self.ident("class name")
            if cls2 != cls:
                self.err(f"creation type mismatch: {cls} vs {cls2}")
            self.expect("(")
            cargs = []
            if self.peek().text != ")":
                while True:
                    cargs.append(self.ident("object variable"))
                    if not self.accept(","):
                        break
            self.expect(")")
            self.expect(";")
            creations.append(Creation(var, cls, cargs))
        if call is None:
            self.err("main block must end with one asynchronous call")
        self.expect("}")
        return MainBlock(creations, call[0], call[1], call[2])

    # ---- types

    def parse_type(self, allow_class: bool = True):
        t = self.peek()
        if t.text == "Int":
            self.next()
            return ast.INT
        if t.text == "Rat":
            self.next()
            return ast.RAT
        if t.text == "Bool":
            self.next()
            return ast.BOOL
        if t.text == "Unit":
            self.next()
            return ast.UNIT_T
        if t.text == "List":
            self.next()
            self.expect("<")
            inner = self.parse_type(allow_class=False)
            self.expect(">")
            return ast.ListT(inner)
        if t.text == "Fut":
            self.next()
            self.expect("<")
            inner = self.parse_type(allow_class=False)
            self.expect(">")
            return ast.FutT(inner)
        self.err(f"expected data type, found {t.text!r}")

    # ---- statements

    def parse_block(self) -> Stmt:
        self.expect("{")
        stmts = []
        while self.peek().text != "}":
            stmts.append(self.parse_stmt())
        self.expect("}")
        if not stmts:
            return Skip()
        return seq_of(stmts)

    def looks_like_type(self) -> bool:
        return self.peek().text in ("Int", "Rat", "Bool", "Unit", "List", "Fut")

    def parse_stmt(self) -> Stmt:
        t = self.peek()
        if t.text == "skip":
            self.next()
            self.expect(";")
            return Skip()
        if t.text == "return":
            self.next()
            e = self.parse_expr()
            self.expect(";")
            return Return(e)
        if t.text == "await" or _AWAIT_PP.match(t.text):
            self.next()
            pp = None
            m = _AWAIT_PP.match(t.text)
            if m:
                pp = int(m.group(1))
            g = self.parse_expr()
            is_fut = self.accept("?")
            self.expect(";")
            return Await(g, is_fut, pp)
        if t.text == "if":
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then = self.parse_block()
            els = None
            if self.accept("else"):
                els = self.parse_block()
            return If(cond, then, els)
        if t.text == "while":
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            body = self.parse_block()
            return While(cond, body)
        decl = None
        if self.looks_like_type():
            decl = self.parse_type(allow_class=False)
        target: Var | FieldAcc
        if self.peek().text == "this":
            if decl is not None:
                self.err("fields are declared in the class body, not assigned with a type")
            self.next()
            self.expect(".")
            target = FieldAcc(self.ident("field name"))
        else:
            target = Var(self.ident("variable name"))
        self.expect("=")
        return self.parse_rhs(decl, target)

    def parse_rhs(self, decl, target) -> Stmt:
        # call: ident ! m ( ... )
        if self.peek().kind == "id" and self.peek(1).text == "!":
            if not isinstance(target, Var):
                self.err("a call must assign its future to a variable")
            callee = self.ident()
            self.expect("!")
            meth = self.ident("method name")
            self.expect("(")
            args = []
            if self.peek().text != ")":
                while True:
                    args.append(self.parse_expr())
                    if not self.accept(","):
                        break
            self.expect(")")
            self.expect(";")
            return CallStmt(decl, target, callee, meth, args)
        e = self.parse_expr()
        if self.peek().text == ".":
            self.next()
            g = self.peek()
            pp = None
            if g.text == "get":
                self.next()
            else:
                m = _GET_PP.match(g.text)
                if not m:
                    self.err(f"expected 'get' after '.', found {g.text!r}")
                pp = int(m.group(1))
                self.next()
            self.expect(";")
            if not isinstance(target, Var):
                self.err("a get must assign to a variable")
            return Get(decl, target, e, pp)
        self.expect(";")
        return Assign(decl, target, e)

    # ---- expressions (precedence climbing)

    def parse_expr(self):
        return self.parse_or()

    def _binloop(self, sub, ops):
        e = sub()
        while self.peek().text in ops:
            op = self.next().text
            e = Bin(op, e, sub())
        return e

    def parse_or(self):
        return self._binloop(self.parse_and, ("||",))

    def parse_and(self):
        return self._binloop(self.parse_eq, ("&&",))

    def parse_eq(self):
        return self._binloop(self.parse_cmp, ("==", "!="))

    def parse_cmp(self):
        return self._binloop(self.parse_add, ("<", "<=", ">", ">="))

    def parse_add(self):
        return self._binloop(self.parse_mul, ("+", "-"))

    def parse_mul(self):
        return self._binloop(self.parse_unary, ("*", "/"))

    def parse_unary(self):
        t = self.peek()
        if t.text == "!":
            self.next()
            return Un("!", self.parse_unary())
        if t.text == "-":
            self.next()
            return Un("neg", self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            return IntLit(int(t.text))
        if t.text == "(":
            self.next()
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.text == "True":
            self.next()
            return BoolLit(True)
        if t.text == "False":
            self.next()
            return BoolLit(False)
        if t.text == "Nil":
            self.next()
            return NilLit()
        if t.text == "Never":
            self.next()
            return NeverLit()
        if t.text == "unit":
            self.next()
            return UnitLit()
        if t.text in ("len", "hd", "tl"):
            op = self.next().text
            self.expect("(")
            e = self.parse_expr()
            self.expect(")")
            return Builtin(op, [e])
        if t.text == "Cons":
            self.next()
            self.expect("(")
            a = self.parse_expr()
            self.expect(",")
            b = self.parse_expr()
            self.expect(")")
            return Builtin("Cons", [a, b])
        if t.text == "this":
            self.next()
            self.expect(".")
            return FieldAcc(self.ident("field name"))
        if t.kind == "id":
            self.next()
            return Var(t.text)
        self.err(f"expected expression, found {t.text!r}")


def _assign_program_points(prog: Program, p: Parser):
    """Fill missing get/await ids and number loops, pre-order, skipping ids
    already used in the source."""
    used: set[int] = set()

    def collect(s: Stmt):
        for st in ast.stmt_list(s):
            if isinstance(st, (Get, Await)) and st.pp is not None:
                if st.pp in used:
                    p.err(f"duplicate program-point identifier {st.pp}")
                used.add(st.pp)
            if isinstance(st, If):
                collect(st.then)
                if st.els is not None:
                    collect(st.els)
            if isinstance(st, While):
                collect(st.body)

    for _, m in prog.methods():
        collect(m.body)

    counter = 0

    def fresh() -> int:
        nonlocal counter
        while counter in used:
            counter += 1
        used.add(counter)
        return counter

    def assign(s: Stmt):
        for st in ast.stmt_list(s):
            if isinstance(st, (Get, Await)) and st.pp is None:
                st.pp = fresh()
            if isinstance(st, While):
                st.pp = fresh()
                assign(st.body)
            if isinstance(st, If):
                assign(st.then)
                if st.els is not None:
                    assign(st.els)

    for _, m in prog.methods():
        assign(m.body)


def _check_unique_names(prog: Program, p: Parser):
    """Variable, field and class names are program-wide unique."""
    seen: set[str] = set()

    def add(name: str, what: str):
        if name in seen:
            p.err(f"duplicate {what} {name!r}: identifiers are program-wide unique")
        seen.add(name)

    for c in prog.classes:
        add(c.name, "class name")
    for c in prog.classes:
        for f, _cn in c.refparams:
            add(f, "reference field")
        for f, _ty, _init in c.fields:
            add(f, "field")
        for m in c.methods:
            for n, _ty in m.params:
                add(n, "parameter")
            for st in _all_stmts(m.body):
                if isinstance(st, (Assign, Get, CallStmt)) and st.decl is not None:
                    add(st.target.name, "variable")
    for cr in prog.main.creations:
        add(cr.var, "object variable")


def _all_stmts(s: Stmt):
    for st in ast.stmt_list(s):
        yield st
        if isinstance(st, If):
            yield from _all_stmts(st.then)
            if st.els is not None:
                yield from _all_stmts(st.els)
        if isinstance(st, While):
            yield from _all_stmts(st.body)


def parse(src: str, filename: str = "<input>") -> Program:
    """Parse CAO source text into a Program (program points assigned)."""
    return Parser(src, filename).parse_program()
