"""May-analysis of which methods resolve the futures read at each get site.

Flow-sensitive over future-carrying locals per method, flow-insensitive
fixpoint over future-carrying fields, returns and parameters across the
program. Call targets resolve statically through the immutable reference
fields. The result at a site is a superset of the methods observed to
resolve reads there in any run.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from . import ast
from .ast import (
    Assign, Await, Bin, Builtin, CallStmt, FieldAcc, FutT, Get, If, IntLit,
    ListT, Return, Seq, Skip, Stmt, Un, Var, While, stmt_list,
)

PT = frozenset  # of qualified method names

EMPTY: PT = frozenset()


def carries_future(ty) -> bool:
    if isinstance(ty, FutT):
        return True
    if isinstance(ty, ListT):
        return ty.elem is not None and carries_future(ty.elem)
    return False


@dataclass
class PointsTo:
    program: ast.Program
    fields: dict = dc_field(default_factory=dict)  # field -> PT
    returns: dict = dc_field(default_factory=dict)  # method -> PT (content of returned futures)
    params: dict = dc_field(default_factory=dict)  # (method, param) -> PT
    sites: dict = dc_field(default_factory=dict)  # get pp -> PT

    def __post_init__(self):
        self._solve()

    def site(self, pp: int) -> PT:
        if pp not in self.sites:
            raise KeyError(f"no get site with program point {pp}")
        return self.sites[pp]

    def table(self) -> dict:
        return dict(sorted(self.sites.items()))

    # ------------------------------------------------------------- transfer

    def _eval(self, e, env: dict) -> PT:
        if isinstance(e, Var):
            return env.get(e.name, EMPTY)
        if isinstance(e, FieldAcc):
            return self.fields.get(e.name, EMPTY)
        if isinstance(e, Builtin):
            if e.op in ("hd", "tl"):
                return self._eval(e.args[0], env)
            if e.op == "Cons":
                return self._eval(e.args[0], env) | self._eval(e.args[1], env)
            return EMPTY
        if isinstance(e, (Bin, Un)):
            return EMPTY  # futures take part in no operators
        return EMPTY

    def _read_content(self, resolvers: PT) -> PT:
        """Futures contained in the values read from the given resolvers."""
        out: PT = EMPTY
        for m in resolvers:
            out |= self.returns.get(m, EMPTY)
        return out

    def _method(self, cls: ast.ClassDecl, md: ast.MethodDecl) -> bool:
        qual = f"{cls.name}.{md.name}"
        refcls = dict(cls.refparams)
        changed = False
        env = {n: self.params.get((qual, n), EMPTY) for n, ty in md.params
               if carries_future(ty)}

        def note_field(f: str, pt: PT):
            nonlocal changed
            if pt - self.fields.get(f, EMPTY):
                self.fields[f] = self.fields.get(f, EMPTY) | pt
                changed = True

        def note_site(pp: int, pt: PT):
            nonlocal changed
            if pt - self.sites.get(pp, EMPTY):
                self.sites[pp] = self.sites.get(pp, EMPTY) | pt
                changed = True

        def walk(s: Stmt, env: dict) -> dict:
            for st in stmt_list(s):
                if isinstance(st, (Skip, Await)):
                    continue
                if isinstance(st, Assign):
                    pt = self._eval(st.rhs, env)
                    if isinstance(st.target, FieldAcc):
                        note_field(st.target.name, pt)
                    else:
                        env[st.target.name] = pt
                elif isinstance(st, CallStmt):
                    callee = f"{refcls[st.callee]}.{st.method}"
                    env[st.target.name] = frozenset((callee,))
                    cmd = self.program.resolve_method(callee)[1]
                    for (pn, pty), a in zip(cmd.params, st.args):
                        if carries_future(pty):
                            pt = self._eval(a, env)
                            key = (callee, pn)
                            if pt - self.params.get(key, EMPTY):
                                self.params[key] = self.params.get(key, EMPTY) | pt
                                nonlocal_changed()
                elif isinstance(st, Get):
                    resolvers = self._eval(st.fut, env)
                    note_site(st.pp, resolvers)
                    env[st.target.name] = self._read_content(resolvers)
                elif isinstance(st, Return):
                    if carries_future(md.ret):
                        pt = self._eval(st.e, env)
                        if pt - self.returns.get(qual, EMPTY):
                            self.returns[qual] = self.returns.get(qual, EMPTY) | pt
                            nonlocal_changed()
                elif isinstance(st, If):
                    e1 = walk(st.then, dict(env))
                    e2 = walk(st.els, dict(env)) if st.els is not None else dict(env)
                    keys = set(e1) | set(e2)
                    env = {k: e1.get(k, EMPTY) | e2.get(k, EMPTY) for k in keys}
                elif isinstance(st, While):
                    while True:
                        e1 = walk(st.body, dict(env))
                        keys = set(e1) | set(env)
                        joined = {k: e1.get(k, EMPTY) | env.get(k, EMPTY) for k in keys}
                        if joined == env:
                            break
                        env = joined
                else:
                    raise AssertionError(st)
            return env

        def nonlocal_changed():
            nonlocal changed
            changed = True

        walk(md.body, env)
        return changed

    def _solve(self):
        for pp, (kind, _n) in self.program.program_points().items():
            if kind == "get":
                self.sites.setdefault(pp, EMPTY)
        changed = True
        while changed:
            changed = False
            for cls, md in self.program.methods():
                if self._method(cls, md):
                    changed = True


def points_to(program: ast.Program, site_id: int) -> PT:
    return PointsTo(program).site(site_id)
