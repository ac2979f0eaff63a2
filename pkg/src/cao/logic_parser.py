"""Text syntax for state formulas, trace formulas and behavioral-type files.

Trace formulas: ``forall i:I. isEvent(i) -> [i] = noEv``, ``[i] |- (r > 0)``,
event terms like ``futREv(_, _, Comp.cmp, v, 0)`` with ``_`` wildcards.
Identifiers resolve to bound variables first, then to method/object names of
the program under analysis.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Any, Optional

from . import ast, fos as F, mso as M
from .fos import CaoLogicError
from .parser import CaoError
from .values import ObjRef

_TOK = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct><->|->|\|-|\|\||&&|==|!=|<=|>=|[!<>=+\-*/(){}\[\],.:;?&|_])
    """,
    re.VERBOSE,
)

SORTS = {"I", "Int", "Nat", "Rat", "Bool", "Fut", "O", "M", "Expr", "Any"}

_EVENT_KINDS = set(M._EV_ARITY)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(src: str, filename: str) -> list:
    toks, line, col, pos = [], 1, 1, 0
    while pos < len(src):
        m = _TOK.match(src, pos)
        if m is None:
            raise CaoLogicError(f"unexpected character {src[pos]!r}", line, col, filename)
        text, kind = m.group(0), m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class LogicParser:
    def __init__(self, src: str, program: Optional[ast.Program] = None,
                 filename: str = "<formula>", assumed: frozenset = frozenset()):
        self.toks = _lex(src, filename)
        self.i = 0
        self.program = program
        self.filename = filename
        self.bound: list[str] = []
        self.assumed = assumed  # declared predicate constants

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def err(self, msg: str):
        t = self.peek()
        raise CaoLogicError(msg, t.line, t.col, self.filename)

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text:
            self.err(f"expected {text!r}, found {t.text!r}")
        return self.next()

    def accept(self, text: str) -> bool:
        if self.peek().text == text:
            self.next()
            return True
        return False

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "id":
            self.err(f"expected identifier, found {t.text!r}")
        return self.next().text

    # ---------------------------------------------------------- name lookup

    def method_const(self, name: str) -> str:
        if self.program is None:
            return name
        try:
            c, m = self.program.resolve_method(name)
            return f"{c.name}.{m.name}"
        except KeyError as e:
            raise CaoLogicError(str(e), self.peek().line, self.peek().col,
                                self.filename)

    def resolve_name(self, name: str):
        """Bound variable, else object name, else qualified method name."""
        if name in self.bound:
            return M.MVar(name)
        if self.program is not None:
            if any(cr.var == name for cr in self.program.main.creations):
                return M.MLit(ObjRef(name))
            try:
                c, m = self.program.resolve_method(name)
                return M.MLit(f"{c.name}.{m.name}")
            except KeyError:
                pass
        return M.MVar(name)  # free variable: caller supplies a binding

    # ------------------------------------------------------------ MSO layer

    def parse_mso(self):
        f = self._mso_quant()
        if self.peek().kind != "eof":
            self.err(f"trailing input {self.peek().text!r}")
        return f

    def _mso_quant(self):
        t = self.peek()
        if t.text in ("forall", "exists"):
            self.next()
            var = self.ident()
            second = False
            if self.accept("subset"):
                second = True
                sort = self.ident()
            else:
                self.expect(":")
                sort = self.ident()
            if sort not in SORTS:
                self.err(f"unknown sort {sort!r}")
            self.expect(".")
            self.bound.append(var)
            body = self._mso_quant()
            self.bound.pop()
            if t.text == "forall":
                return (M.MAll2 if second else M.MAll)(var, sort, body)
            return (M.MEx2 if second else M.MEx)(var, sort, body)
        return self._mso_iff()

    def _mso_iff(self):
        f = self._mso_imp()
        while self.accept("<->"):
            g = self._mso_imp()
            f = M.MAnd(M.MImp(f, g), M.MImp(g, f))
        return f

    def _mso_imp(self):
        f = self._mso_or()
        if self.accept("->"):
            return M.MImp(f, self._mso_imp_rhs())
        return f

    def _mso_imp_rhs(self):
        f = self._mso_quant() if self.peek().text in ("forall", "exists") else self._mso_or()
        if self.accept("->"):
            return M.MImp(f, self._mso_imp_rhs())
        return f

    def _mso_or(self):
        f = self._mso_and()
        while self.peek().text in ("|", "||"):
            self.next()
            f = M.MOr(f, self._mso_and())
        return f

    def _mso_and(self):
        f = self._mso_unary()
        while self.peek().text in ("&", "&&"):
            self.next()
            f = M.MAnd(f, self._mso_unary())
        return f

    def _mso_unary(self):
        if self.accept("!"):
            return M.MNot(self._mso_unary())
        return self._mso_atom()

    def _mso_atom(self):
        t = self.peek()
        if t.text == "(":
            self.next()
            f = self._mso_quant()
            self.expect(")")
            return f
        if t.text == "true":
            self.next()
            return M.MBool(True)
        if t.text == "false":
            self.next()
            return M.MBool(False)
        if t.text == "[":
            self.next()
            pos = self._mterm()
            self.expect("]")
            if self.accept("|-"):
                phi = self._fos_embedded()
                return M.MStAt(pos, phi)
            if self.accept("="):
                return M.MEvAt(pos, self._evpat())
            if self.accept("!="):
                return M.MNot(M.MEvAt(pos, self._evpat()))
            self.err("expected '=' or '|-' after a position")
        if t.kind == "id" and t.text.startswith("is") and self.peek(1).text == "(":
            name = self.next().text
            self.expect("(")
            arg = self._mterm()
            self.expect(")")
            return M.MPred(name, (arg,))
        # term comparison / membership
        l = self._mterm()
        t = self.peek()
        if t.text == "=":
            self.next()
            return M.MEq(l, self._mterm())
        if t.text == "!=":
            self.next()
            return M.MNot(M.MEq(l, self._mterm()))
        if t.text in ("<", "<=", ">", ">="):
            op = self.next().text
            return M.MCmp(op, l, self._mterm())
        if t.text == "in":
            self.next()
            return M.MSub(M.MApp("singleton", (l,)), self._mterm())
        if t.text == "subset":
            self.next()
            return M.MSub(l, self._mterm())
        self.err(f"expected comparison after term, found {t.text!r}")

    def _mterm(self):
        l = self._mterm_atom()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            l = M.MApp(op, (l, self._mterm_atom()))
        return l

    def _mterm_atom(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            return M.MLit(int(t.text))
        if t.text == "last":
            self.next()
            return M.MApp("last", ())
        if t.text == "(":
            self.next()
            e = self._mterm()
            self.expect(")")
            return e
        if t.kind == "id":
            name = self.next().text
            if self.peek().text == "." and self.peek(1).kind == "id":
                self.next()
                name = f"{name}.{self.ident()}"
                return M.MLit(self.method_const(name))
            return self.resolve_name(name)
        self.err(f"expected term, found {t.text!r}")

    def _evpat(self):
        t = self.peek()
        if t.text in ("noEv", "diamond"):
            self.next()
            return M.EvPat(t.text)
        kind = self.ident()
        if kind not in _EVENT_KINDS:
            self.err(f"unknown event kind {kind!r}")
        self.expect("(")
        slots = []
        if self.peek().text != ")":
            while True:
                slots.append(self._slot())
                if not self.accept(","):
                    break
        self.expect(")")
        return M.EvPat(kind, tuple(slots))

    def _slot(self):
        if self.accept("_"):
            return M.WILD
        if self.peek().text == "(":
            self.next()
            inner = []
            if self.peek().text != ")":
                while True:
                    inner.append(self._slot())
                    if not self.accept(","):
                        break
            self.expect(")")
            return tuple(inner)
        return self._mterm()

    # ------------------------------------------------------------ FOS layer

    def _fos_embedded(self):
        if self.peek().text == "(":
            self.next()
            f = self.fos_formula()
            self.expect(")")
            return f
        return self._fos_atom()

    def parse_fos(self):
        f = self.fos_formula()
        if self.peek().kind != "eof":
            self.err(f"trailing input {self.peek().text!r}")
        return f

    def fos_formula(self):
        t = self.peek()
        if t.text in ("forall", "exists"):
            self.next()
            var = self.ident()
            self.expect(":")
            sort = self.ident()
            if sort not in SORTS:
                self.err(f"unknown sort {sort!r}")
            self.expect(".")
            self.bound.append(var)
            body = self.fos_formula()
            self.bound.pop()
            return (F.FAll if t.text == "forall" else F.FEx)(var, sort, body)
        return self._fos_iff()

    def _fos_iff(self):
        f = self._fos_imp()
        while self.accept("<->"):
            g = self._fos_imp()
            f = F.FAnd(F.FImp(f, g), F.FImp(g, f))
        return f

    def _fos_imp(self):
        f = self._fos_or()
        if self.accept("->"):
            return F.FImp(f, self._fos_imp())
        return f

    def _fos_or(self):
        f = self._fos_and()
        while self.peek().text in ("|", "||"):
            self.next()
            f = F.FOr(f, self._fos_and())
        return f

    def _fos_and(self):
        f = self._fos_unary()
        while self.peek().text in ("&", "&&"):
            self.next()
            f = F.FAnd(f, self._fos_unary())
        return f

    def _fos_unary(self):
        if self.accept("!"):
            return F.FNot(self._fos_unary())
        return self._fos_atom()

    def _fos_atom(self):
        t = self.peek()
        if t.text == "true":
            self.next()
            return F.FBool(True)
        if t.text == "false":
            self.next()
            return F.FBool(False)
        if t.text == "(":
            save = self.i
            self.next()
            f = self.fos_formula()
            if self.peek().text == ")" and self.peek(1).text not in (
                    "=", "!=", "<", "<=", ">", ">=", "[", "+", "-", "*", "/"):
                self.next()
                return f
            self.i = save  # parenthesized term after all
        if t.kind == "id" and t.text in self.assumed:
            return F.FPred(self.next().text)
        l = self._fterm()
        t = self.peek()
        if t.text == "=":
            self.next()
            return F.FEq(l, self._fterm())
        if t.text == "!=":
            self.next()
            return F.FNot(F.FEq(l, self._fterm()))
        if t.text in ("<", "<=", ">", ">="):
            op = self.next().text
            return F.FCmp(op, l, self._fterm())
        # a bare Bool-typed term is shorthand for comparison with True
        return F.FEq(l, F.FLit(True))

    def _fterm(self):
        l = self._fterm_mul()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            l = F.FApp(op, (l, self._fterm_mul()))
        return l

    def _fterm_mul(self):
        l = self._fterm_unary()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            l = F.FApp(op, (l, self._fterm_unary()))
        return l

    def _fterm_unary(self):
        if self.accept("-"):
            return F.FApp("neg", (self._fterm_unary(),))
        return self._fterm_post()

    def _fterm_post(self):
        e = self._fterm_atom()
        while self.accept("["):
            idx = self._fterm()
            self.expect("]")
            e = F.FApp("index", (e, idx))
        return e

    def _fterm_atom(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            if self.accept("/"):
                d = self.peek()
                if d.kind == "int":
                    self.next()
                    return F.FLit(Fraction(int(t.text), int(d.text)))
                self.err("expected denominator")
            return F.FLit(int(t.text))
        if t.text == "(":
            self.next()
            e = self._fterm()
            self.expect(")")
            return e
        if t.text in ("True", "False"):
            self.next()
            return F.FLit(t.text == "True")
        if t.text == "Nil":
            self.next()
            return F.FLit(())
        if t.text == "this":
            self.next()
            self.expect(".")
            return F.FApp("select", (F.FProg("heap"), F.FField(self.ident())))
        if t.text in ("len", "hd", "tl", "anon"):
            op = self.next().text
            self.expect("(")
            e = self._fterm()
            self.expect(")")
            return F.FApp(op, (e,))
        if t.text == "Cons":
            self.next()
            self.expect("(")
            a = self._fterm()
            self.expect(",")
            b = self._fterm()
            self.expect(")")
            return F.FApp("Cons", (a, b))
        if t.text in ("select", "store"):
            op = self.next().text
            self.expect("(")
            args = [self._fterm()]
            while self.accept(","):
                nxt = self.peek()
                if op in ("select", "store") and len(args) == 1 and nxt.kind == "id":
                    args.append(F.FField(self.next().text))
                else:
                    args.append(self._fterm())
            self.expect(")")
            return F.FApp(op, tuple(args))
        if t.kind == "id":
            name = self.next().text
            if name in self.bound:
                return F.FVar(name)
            return F.FProg(name)
        self.err(f"expected a term, found {t.text!r}")


def parse_mso(src: str, program: Optional[ast.Program] = None,
              filename: str = "<formula>"):
    return LogicParser(src, program, filename).parse_mso()


def parse_fos(src: str, program: Optional[ast.Program] = None,
              filename: str = "<formula>", bound: tuple = (),
              assumed: frozenset = frozenset()):
    p = LogicParser(src, program, filename, assumed)
    p.bound = list(bound)
    return p.parse_fos()


@dataclass
class FormulaFile:
    method: Optional[str]
    formula: Any


def parse_formula_file(src: str, program: Optional[ast.Program] = None,
                       filename: str = "<formula>") -> FormulaFile:
    """An optional ``method C.m;`` target line followed by one trace formula."""
    p = LogicParser(src, program, filename)
    method = None
    if p.peek().text == "method":
        p.next()
        name = p.ident()
        if p.accept("."):
            name = f"{name}.{p.ident()}"
        p.expect(";")
        method = p.method_const(name)
    f = p.parse_mso()
    return FormulaFile(method, f)
