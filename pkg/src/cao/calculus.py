"""Sequent-calculus checking of methods against behavioral method types,
postcondition obligations by symbolic execution over updates, and
obligation-scheme consistency.

Verdicts are three-valued: proved, refuted-candidate (a rule premise is
demonstrably violated or no rule matches the statement/type pair), or
unknown (open obligations: missing loop invariants, imprecise analyses,
conditions outside the prover's fragment)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from typing import Any, Optional

from . import ast
from .ast import (
    Assign, Await, CallStmt, FieldAcc, Get, If, Return, Skip, Stmt, While,
    print_expr, stmt_list,
)
from .btypes import (
    BtypeFile, CallAct, ChoiceT, DownAct, PassiveT, Protocol, SeqT, SkipT,
    StarT, distribute_head, normalize, role_binding, seq_of,
)
from .fos import (
    FApp, FBool, FField, FNot, FProg, FVar, pretty_fos, subst_formula,
)
from .parser import CaoError
from .points_to import PointsTo
from .updates import (
    EMPTY_UPD, Upd, apply_update, extend, formula_of_expr, term_of_expr,
)
from .vc import VCResult, discharge_vc, vc_to_smtlib

PROVED, REFUTED, UNKNOWN = "proved", "refuted-candidate", "unknown"


@dataclass
class ProofNode:
    rule: str
    goal: str
    status: str
    premises: list = dc_field(default_factory=list)
    note: str = ""

    def to_json(self) -> dict:
        return {"rule": self.rule, "goal": self.goal, "status": self.status,
                "note": self.note,
                "premises": [p.to_json() for p in self.premises]}


@dataclass
class MethodVerdict:
    method: str
    status: str
    tree: Optional[ProofNode]
    obligations: list = dc_field(default_factory=list)

    def to_json(self) -> dict:
        return {"method": self.method, "status": self.status,
                "obligations": list(self.obligations),
                "tree": self.tree.to_json() if self.tree else None}


def _combine(children: list) -> str:
    if any(c.status == REFUTED for c in children):
        return REFUTED
    if any(c.status == UNKNOWN for c in children):
        return UNKNOWN
    return PROVED


def _node(rule: str, goal: str, premises: list, note: str = "") -> ProofNode:
    return ProofNode(rule, goal, _combine(premises), premises, note)


def _goal_str(gamma: list, upd: Upd, stmts: list, tail: str) -> str:
    g = ", ".join(pretty_fos(f) for f in gamma)
    s = "; ".join(_stmt_head(x) for x in stmts[:2]) + ("; ..." if len(stmts) > 2 else "")
    return f"{g} => {upd!r}[{s} ~> {tail}]"


def _stmt_head(s: Stmt) -> str:
    if isinstance(s, If):
        return f"if({print_expr(s.cond)})" + "{...}"
    if isinstance(s, While):
        return f"while({print_expr(s.cond)})" + "{...}"
    from .ast import _print_stmt

    out: list[str] = []
    _print_stmt(s, "", out)
    return out[0].rstrip(";") if out else "?"


class Prover:
    def __init__(self, program: ast.Program, btype: BtypeFile,
                 model_domain: Optional[list] = None):
        self.program = program
        self.btype = btype
        self.assumed = btype.assumes
        self.p2 = PointsTo(program)
        self.model_domain = model_domain
        self._fresh = 0
        self.vcs: list = []  # (label, gamma, phi, VCResult)
        self.obligations: list = []
        self.var_sorts: dict = {}  # rational-typed variables by name

    def fresh(self, base: str, ty=None) -> FVar:
        self._fresh += 1
        name = f"_{base}{self._fresh}"
        if isinstance(ty, ast.RatT):
            self.var_sorts[name] = "Rat"
        return FVar(name)

    # --------------------------------------------------------------- leaves

    def discharge(self, gamma: list, phi, label: str) -> ProofNode:
        r = discharge_vc(gamma, phi, self.assumed, self.model_domain,
                         self.var_sorts)
        self.vcs.append((label, list(gamma), phi, r))
        goal = f"{', '.join(pretty_fos(g) for g in gamma)} => {pretty_fos(phi)}"
        if r.status == "valid":
            return ProofNode("vc", goal, PROVED)
        if r.status == "invalid":
            return ProofNode("vc", goal, REFUTED, note=f"counterexample {r.model}")
        self.obligations.append({"kind": "vc", "label": label, "goal": goal,
                                 "reason": r.reason})
        return ProofNode("vc", goal, UNKNOWN, note=r.reason)

    def contradictory(self, gamma: list) -> bool:
        return discharge_vc(gamma, FBool(False), self.assumed).status == "valid"

    def p2_premise(self, pp: int, required: frozenset) -> ProofNode:
        analysis = self.p2.site(pp)
        goal = f"=> [get_{pp} ~>p2 {{{', '.join(sorted(required))}}}]"
        if analysis <= required:
            return ProofNode("ex1", goal, PROVED,
                             note=f"analysis {{{', '.join(sorted(analysis))}}}")
        self.obligations.append({
            "kind": "p2", "site": pp, "required": sorted(required),
            "analysis": sorted(analysis)})
        return ProofNode("ex1", goal, UNKNOWN,
                         note=f"analysis {{{', '.join(sorted(analysis))}}} "
                              f"not within the required set")

    def _mismatch(self, stmts: list, L, goal: str) -> ProofNode:
        head_txt = _stmt_head(stmts[0]) if stmts else "<end>"
        return ProofNode("no-rule", goal, REFUTED,
                         note=f"statement {head_txt!r} does not match type {L!r}")

    # ----------------------------------------------------- method-type rules

    def prove_method(self, method: str) -> MethodVerdict:
        cls, md = self.program.resolve_method(method)
        if any(isinstance(s, Await) for s in _deep_stmts(md.body)):
            return MethodVerdict(method, UNKNOWN, None, [{
                "kind": "await", "method": method,
                "reason": "method types do not cover suspension"}])
        protocol = effective_protocol(self.program, self.btype, method)
        if protocol is None:
            return MethodVerdict(method, UNKNOWN, None,
                                 [{"kind": "missing-type", "method": method}])
        roles = role_binding(self.btype, self.program, method)
        self.var_sorts = _rat_sorts(self.program, cls, md)
        n0 = len(self.obligations)
        gamma = [protocol.pre]
        if method == initial_method(self.program):
            # the initial process is scheduled before anything else can run,
            # so it starts on the freshly initialized heap
            gamma += _initializer_facts(self.program, cls)
        tree = self.prove_seq(gamma, EMPTY_UPD, stmt_list(md.body),
                              protocol.body, cls, roles)
        root = _node("root", f"{pretty_fos(protocol.pre)} => "
                             f"[{method} ~>met {protocol.body!r}]", [tree])
        return MethodVerdict(method, root.status, root,
                             self.obligations[n0:])

    def prove_seq(self, gamma: list, upd: Upd, stmts: list, L,
                  cls: ast.ClassDecl, roles: dict) -> ProofNode:
        L = distribute_head(L)
        if isinstance(L, SeqT):
            head_t, rest_t = L.l, L.r
        else:
            head_t, rest_t = L, SkipT()
        goal = _goal_str(gamma, upd, stmts, repr(L))

        if not stmts or all(isinstance(s, Skip) for s in stmts):
            if isinstance(normalize(L), SkipT):
                return ProofNode("met-skip", goal, PROVED)
            return self._mismatch(stmts, L, goal)
        head, rest = stmts[0], stmts[1:]

        if isinstance(head, Skip):
            inner = self.prove_seq(gamma, upd, rest, L, cls, roles)
            return _node("skip-seq", goal, [inner])

        if isinstance(head, Assign):
            if isinstance(head.target, FieldAcc):
                t = FApp("store", (FProg("heap"), FField(head.target.name),
                                   term_of_expr(head.rhs)))
                upd2 = extend(upd, "heap", t)
                rule = "met-F"
            else:
                upd2 = extend(upd, head.target.name, term_of_expr(head.rhs))
                rule = "met-V"
            inner = self.prove_seq(gamma, upd2, rest, L, cls, roles)
            return _node(rule, goal, [inner])

        if isinstance(head, CallStmt):
            if not isinstance(head_t, CallAct):
                return self._mismatch(stmts, L, goal)
            callee_cls = dict(cls.refparams)[head.callee]
            qual = f"{callee_cls}.{head.method}"
            bound_field = roles.get(head_t.role)
            if qual != head_t.method or bound_field != head.callee:
                return ProofNode(
                    "met-call", goal, REFUTED,
                    note=f"call {head.callee}!{qual} does not match action "
                         f"{head_t.role}!{head_t.method} "
                         f"(role {head_t.role} -> {bound_field})")
            _, cmd = self.program.resolve_method(qual)
            sub = {("prog", pn): term_of_expr(a)
                   for (pn, _ty), a in zip(cmd.params, head.args)}
            phi = subst_formula(head_t.phi, sub)
            vc = self.discharge(gamma, apply_update(upd, phi),
                                f"met-call {qual}")
            upd2 = extend(upd, head.target.name, self.fresh("fut"))
            inner = self.prove_seq(gamma, upd2, rest, rest_t, cls, roles)
            return _node("met-call", goal, [vc, inner])

        if isinstance(head, Get):
            if not isinstance(head_t, PassiveT):
                return self._mismatch(stmts, L, goal)
            p2node = self.p2_premise(head.pp, frozenset(head_t.methods))
            v = self.fresh("v", head.target.ty)
            upd2 = extend(upd, head.target.name, v)
            phi_v = subst_formula(head_t.phi, {("prog", "result"): v})
            pos = apply_update(upd2, phi_v)
            neg = apply_update(upd2, FNot(phi_v))
            branches = []
            for guard, bt, tag in ((pos, head_t.left, "then"),
                                   (neg, head_t.right, "else")):
                g2 = gamma + [guard]
                if self.contradictory(g2):
                    branches.append(ProofNode(f"met-get/{tag}", goal, PROVED,
                                              note="contradictory context"))
                    continue
                branches.append(self.prove_seq(g2, upd2, rest, bt, cls, roles))
            return _node("met-get", goal, [p2node] + branches)

        if isinstance(head, If):
            # the rewrite L <-> +{L} admits plain statements against any type
            branches = L.branches if isinstance(L, ChoiceT) else (L,)
            g = formula_of_expr(head.cond)
            then_stmts = stmt_list(head.then) + rest
            else_stmts = stmt_list(head.els) + rest
            memo: dict = {}

            def premise(which: str, cond, body_stmts, subset) -> ProofNode:
                key = (which, subset)
                if key not in memo:
                    target = ChoiceT(tuple(branches[i] for i in subset))
                    g2 = gamma + [apply_update(upd, cond)]
                    if self.contradictory(g2):
                        memo[key] = ProofNode("met-if/branch", goal, PROVED,
                                              note="contradictory context")
                    else:
                        memo[key] = self.prove_seq(g2, upd, body_stmts, target,
                                                   cls, roles)
                return memo[key]

            idx = range(len(branches))
            subsets = [c for size in range(1, len(branches) + 1)
                       for c in itertools.combinations(idx, size)]
            best: Optional[list] = None
            best_note = ""
            for i1 in subsets:
                for i2 in subsets:
                    pair = [premise("then", g, then_stmts, i1),
                            premise("else", FNot(g), else_stmts, i2)]
                    note = f"I1={list(i1)} I2={list(i2)}"
                    if _combine(pair) == PROVED:
                        return _node("met-if", goal, pair, note=note)
                    if best is None or _rank(pair) > _rank(best):
                        best, best_note = pair, note
            return _node("met-if", goal, best or [], note=best_note)

        if isinstance(head, While):
            if not isinstance(head_t, StarT):
                return self._mismatch(stmts, L, goal)
            inv = self.btype.invariants.get(head.pp)
            if inv is None:
                self.obligations.append({"kind": "invariant", "loop": head.pp})
                return ProofNode("met-while", goal, UNKNOWN,
                                 note=f"missing loop invariant at loop {head.pp}")
            g = formula_of_expr(head.cond)
            p1 = self.discharge(gamma, apply_update(upd, inv),
                                f"loop {head.pp} invariant initially")
            body = stmt_list(head.body)
            p2 = self.prove_pst([inv, g], EMPTY_UPD, body, inv, cls)
            p3 = self.prove_seq([inv, g], EMPTY_UPD, body, head_t.body, cls, roles)
            p4 = self.prove_seq([inv, FNot(g)], EMPTY_UPD, rest, rest_t, cls, roles)
            return _node("met-while", goal, [p1, p2, p3, p4])

        if isinstance(head, Return):
            if not isinstance(head_t, DownAct) or not isinstance(rest_t, SkipT):
                return self._mismatch(stmts, L, goal)
            upd2 = extend(upd, "result", term_of_expr(head.e))
            vc = self.discharge(gamma, apply_update(upd2, head_t.phi), "met-return")
            return _node("met-return", goal, [vc])

        if isinstance(head, Await):
            return ProofNode("await", goal, UNKNOWN,
                             note="method types do not cover suspension")
        raise AssertionError(head)

    # ------------------------------------------------- postcondition engine

    def prove_pst(self, gamma: list, upd: Upd, stmts: list, psi,
                  cls: ast.ClassDecl) -> ProofNode:
        goal = _goal_str(gamma, upd, stmts, f"pst {pretty_fos(psi)}")
        if not stmts:
            return _node("pst-close", goal,
                         [self.discharge(gamma, apply_update(upd, psi), "pst")])
        head, rest = stmts[0], stmts[1:]
        if isinstance(head, Skip):
            return self.prove_pst(gamma, upd, rest, psi, cls)
        if isinstance(head, Assign):
            if isinstance(head.target, FieldAcc):
                t = FApp("store", (FProg("heap"), FField(head.target.name),
                                   term_of_expr(head.rhs)))
                upd2 = extend(upd, "heap", t)
            else:
                upd2 = extend(upd, head.target.name, term_of_expr(head.rhs))
            inner = self.prove_pst(gamma, upd2, rest, psi, cls)
            return _node("pst-assign", goal, [inner])
        if isinstance(head, CallStmt):
            upd2 = extend(upd, head.target.name, self.fresh("fut"))
            inner = self.prove_pst(gamma, upd2, rest, psi, cls)
            return _node("pst-call", goal, [inner])
        if isinstance(head, Get):
            v = self.fresh("v", head.target.ty)
            upd2 = extend(upd, head.target.name, v)
            ann = self.btype.getposts.get(head.pp)
            if ann is not None:
                callee, post = ann
                prem = self.rule_ex_sync(head.pp, callee, post)
                assume = apply_update(upd2,
                                      subst_formula(post, {("prog", "result"): v}))
                inner = self.prove_pst(gamma + [assume], upd2, rest, psi, cls)
                return _node("ex-sync", goal, prem + [inner])
            inner = self.prove_pst(gamma, upd2, rest, psi, cls)
            return _node("pst-get", goal, [inner])
        if isinstance(head, If):
            g = formula_of_expr(head.cond)
            prems = []
            for cond, body in ((g, head.then), (FNot(g), head.els)):
                g2 = gamma + [apply_update(upd, cond)]
                body_stmts = (stmt_list(body) if body is not None else []) + rest
                if self.contradictory(g2):
                    prems.append(ProofNode("pst-if/branch", goal, PROVED,
                                           note="contradictory context"))
                else:
                    prems.append(self.prove_pst(g2, upd, body_stmts, psi, cls))
            return _node("pst-if", goal, prems)
        if isinstance(head, While):
            inv = self.btype.invariants.get(head.pp)
            if inv is None:
                self.obligations.append({"kind": "invariant", "loop": head.pp})
                return ProofNode("pst-while", goal, UNKNOWN,
                                 note=f"missing loop invariant at loop {head.pp}")
            g = formula_of_expr(head.cond)
            p1 = self.discharge(gamma, apply_update(upd, inv),
                                f"loop {head.pp} invariant initially")
            p2 = self.prove_pst([inv, g], EMPTY_UPD, stmt_list(head.body), inv, cls)
            p3 = self.prove_pst([inv, FNot(g)], EMPTY_UPD, rest, psi, cls)
            return _node("pst-while", goal, [p1, p2, p3])
        if isinstance(head, Return):
            upd2 = extend(upd, "result", term_of_expr(head.e))
            return _node("pst-return", goal,
                         [self.discharge(gamma, apply_update(upd2, psi), "pst-return")])
        if isinstance(head, Await):
            return ProofNode("await", goal, UNKNOWN,
                             note="suspension outside the pst fragment")
        raise AssertionError(head)

    def rule_ex_sync(self, pp: int, callee: str, psi) -> list:
        """The two side premises of the synchronization rule: the read site
        must resolve to the callee alone, whose body establishes psi."""
        p2node = self.p2_premise(pp, frozenset((callee,)))
        ccls, cmd = self.program.resolve_method(callee)
        body = self.prove_pst([], EMPTY_UPD, stmt_list(cmd.body), psi, ccls)
        return [p2node, body]


def _rank(pair: list) -> int:
    order = {REFUTED: 0, UNKNOWN: 1, PROVED: 2}
    return min(order[p.status] for p in pair)


def _rat_sorts(program: ast.Program, cls: ast.ClassDecl,
               md: ast.MethodDecl) -> dict:
    """Names of rational-typed variables in scope (counterexample search may
    only leave the integers for these)."""
    from .frontend import collect_locals

    out = {}
    for n, ty in list(md.params) + list(collect_locals(md).items()):
        if isinstance(ty, ast.RatT):
            out[n] = "Rat"
    if isinstance(md.ret, ast.RatT):
        out["result"] = "Rat"
    return out


def _initializer_facts(program: ast.Program, cls: ast.ClassDecl) -> list:
    from .fos import FEq, FLit
    from .localsem import eval_expr
    from .traces import ObjectState
    from .values import FMap, is_sem_value

    out = []
    empty = ObjectState(FMap(), FMap())
    for name, _ty, init in cls.fields:
        v = eval_expr(init, empty)
        if v is not None and is_sem_value(v):
            out.append(FEq(FApp("select", (FProg("heap"), FField(name))), FLit(v)))
    return out


def _deep_stmts(s: Stmt):
    for st in stmt_list(s):
        yield st
        if isinstance(st, If):
            yield from _deep_stmts(st.then)
            if st.els is not None:
                yield from _deep_stmts(st.els)
        if isinstance(st, While):
            yield from _deep_stmts(st.body)


# --------------------------------------------------------------- the scheme


def effective_protocol(program: ast.Program, btype: BtypeFile,
                       method: str) -> Optional[Protocol]:
    """The declared protocol, or one inferred from contract/class-invariant
    annotations when no explicit type is given."""
    if method in btype.types:
        return btype.types[method]
    cls, _md = program.resolve_method(method)
    contract = btype.contracts.get(method)
    classinv = btype.classinvs.get(cls.name)
    if contract is None and classinv is None:
        return None
    from .skeleton import infer_skeleton, weave_contract

    skel = infer_skeleton(program, method)
    pre, post = contract if contract else (FBool(True), FBool(True))
    initial = initial_method(program) == method
    scheme_pres = {m: p.pre for m, p in btype.types.items()}
    scheme_pres.update({m: c[0] for m, c in btype.contracts.items()})
    return weave_contract(skel, pre, post, classinv, initial, scheme_pres)


def initial_method(program: ast.Program) -> str:
    cls = next(cr.cls for cr in program.main.creations
               if cr.var == program.main.call_target)
    return f"{cls}.{program.main.call_method}"


@dataclass
class ConsistencyReport:
    consistent: bool
    checks: list  # dicts per call action
    initial_ok: bool
    initial_method: str

    def to_json(self) -> dict:
        return {"consistent": self.consistent, "initial_ok": self.initial_ok,
                "initial_method": self.initial_method, "checks": self.checks}


def _call_actions(L):
    if isinstance(L, CallAct):
        yield L
    elif isinstance(L, SeqT):
        yield from _call_actions(L.l)
        yield from _call_actions(L.r)
    elif isinstance(L, StarT):
        yield from _call_actions(L.body)
    elif isinstance(L, ChoiceT):
        for b in L.branches:
            yield from _call_actions(b)
    elif isinstance(L, PassiveT):
        yield from _call_actions(L.left)
        yield from _call_actions(L.right)


def check_consistency(program: ast.Program, btype: BtypeFile) -> ConsistencyReport:
    """Every call condition implies the callee's receive condition, and the
    initial method's receive condition is trivial."""
    checks = []
    ok = True
    protocols = {}
    for m in set(btype.types) | set(btype.contracts):
        try:
            protocols[m] = effective_protocol(program, btype, m)
        except CaoError:
            protocols[m] = None  # suspension: no inferable protocol
    for m, proto in sorted(protocols.items()):
        if proto is None:
            continue
        for act in _call_actions(proto.body):
            callee = protocols.get(act.method) or btype.types.get(act.method)
            pre = callee.pre if callee is not None else FBool(True)
            try:
                _, cmd = program.resolve_method(act.method)
                sorts = {n: "Rat" for n, ty in cmd.params
                         if isinstance(ty, ast.RatT)}
            except KeyError:
                sorts = {}
            r = discharge_vc([act.phi], pre, btype.assumes, var_sorts=sorts)
            entry = {"caller": m, "callee": act.method,
                     "condition": pretty_fos(act.phi),
                     "precondition": pretty_fos(pre), "status": r.status}
            if r.status == "invalid":
                entry["witness"] = r.model
            checks.append(entry)
            if r.status != "valid":
                ok = False
    init = initial_method(program)
    init_proto = protocols.get(init) or btype.types.get(init)
    init_ok = True
    if init_proto is not None and init_proto.pre != FBool(True):
        init_ok = discharge_vc([], init_proto.pre, btype.assumes).status == "valid"
    return ConsistencyReport(ok and init_ok, checks, init_ok, init)


def prove_all(program: ast.Program, btype: BtypeFile, jobs: int = 1,
              model_domain: Optional[list] = None) -> tuple:
    """Per-method verdicts for every method the scheme gives obligations for,
    plus the shared prover (for VC export)."""
    methods = sorted(set(btype.types)
                     | {m for m in btype.contracts}
                     | {f"{c.name}.{md.name}" for c, md in program.methods()
                        if c.name in btype.classinvs})
    prover = Prover(program, btype, model_domain)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        # per-method proofs are independent; each worker gets its own prover
        def one(m: str):
            p = Prover(program, btype, model_domain)
            v = p.prove_method(m)
            return v, p.vcs

        with ThreadPoolExecutor(max_workers=jobs) as ex:
            out = list(ex.map(one, methods))
        verdicts = [v for v, _ in out]
        for _, vcs in out:
            prover.vcs.extend(vcs)
        return verdicts, prover
    verdicts = [prover.prove_method(m) for m in methods]
    return verdicts, prover
