"""Shared fixtures: corpus access, random generators, brute-force baselines."""

from __future__ import annotations

import random
from fractions import Fraction
from pathlib import Path

from cao import ast
from cao.ast import (
    Assign, BoolLit, Bin, If, IntLit, Return, Skip, Var, stmt_list,
)
from cao.btypes import (
    CallAct, ChoiceT, DownAct, PassiveT, SeqT, SkipT, StarT,
)
from cao.events import Diamond, FutEv, FutREv, InvEv, NoEv
from cao.fos import FBool, FCmp, FProg, FLit, FAnd, FOr, FNot
from cao.frontend import load_program
from cao.localsem import eval_expr
from cao.traces import LocalTrace, ObjectState
from cao.values import FMap, FutId, ObjRef

CORPUS = Path(__file__).parent.parent / "corpus"


def corpus_program(name: str):
    return load_program((CORPUS / f"{name}.cao").read_text(), f"{name}.cao")


def corpus_btype(name: str, prog):
    from cao.btypes import parse_btype

    return parse_btype((CORPUS / f"{name}.btype").read_text(), prog, f"{name}.btype")


def corpus_names() -> list:
    return sorted(p.stem for p in CORPUS.glob("*.cao"))


# --------------------------------------------------- random traces and types


METHODS = ("C.m", "D.n")
OBJS = (ObjRef("a"), ObjRef("b"))


def random_state(rng: random.Random) -> ObjectState:
    return ObjectState(FMap(r=rng.randint(-3, 3)),
                       FMap(S=OBJS[rng.randrange(2)], g=rng.randint(-2, 2)))


def random_trace(rng: random.Random, max_positions: int) -> LocalTrace:
    n_events = rng.randrange(0, max(1, (max_positions - 1) // 2) + 1)
    st = random_state(rng)
    hs = [st]
    for k in range(n_events):
        roll = rng.random()
        if roll < 0.45:
            ev = NoEv()
        elif roll < 0.6:
            ev = InvEv(ObjRef("x"), OBJS[rng.randrange(2)], FutId(k),
                       METHODS[rng.randrange(2)], (rng.randint(-2, 2),))
        elif roll < 0.75:
            ev = FutEv(ObjRef("x"), FutId(k), METHODS[rng.randrange(2)],
                       rng.randint(-3, 3))
        elif roll < 0.9:
            ev = FutREv(ObjRef("x"), FutId(k), METHODS[rng.randrange(2)],
                        rng.randint(-3, 3), rng.randrange(2))
        else:
            ev = Diamond()
        st = random_state(rng) if rng.random() < 0.5 else st
        hs += [ev, st]
    return LocalTrace(frozenset(), tuple(hs))


def random_result_phi(rng: random.Random):
    roll = rng.random()
    if roll < 0.25:
        return FBool(True)
    if roll < 0.35:
        return FBool(False)
    op = rng.choice(("<", "<=", ">", ">="))
    return FCmp(op, FProg("result"), FLit(rng.randint(-2, 2)))


def random_type(rng: random.Random, depth: int, allow_star: bool = True):
    if depth <= 0:
        roll = rng.random()
        if roll < 0.3:
            return SkipT()
        if roll < 0.65:
            return CallAct("S", METHODS[rng.randrange(2)], FBool(True))
        return DownAct(random_result_phi(rng))
    roll = rng.random()
    if roll < 0.35:
        return SeqT(random_type(rng, depth - 1, allow_star),
                    random_type(rng, depth - 1, allow_star))
    if roll < 0.55:
        return ChoiceT((random_type(rng, depth - 1, allow_star),
                        random_type(rng, depth - 1, allow_star)))
    if roll < 0.7 and allow_star:
        return StarT(random_type(rng, depth - 1, allow_star=False))
    if roll < 0.9:
        ms = tuple(sorted(set(rng.sample(METHODS, rng.randint(1, 2)))))
        return PassiveT(ms, random_result_phi(rng),
                        random_type(rng, depth - 1, allow_star),
                        random_type(rng, depth - 1, allow_star))
    return random_type(rng, 0)


def has_star(L) -> bool:
    if isinstance(L, StarT):
        return True
    if isinstance(L, SeqT):
        return has_star(L.l) or has_star(L.r)
    if isinstance(L, ChoiceT):
        return any(has_star(b) for b in L.branches)
    if isinstance(L, PassiveT):
        return has_star(L.left) or has_star(L.right)
    return False


# ------------------------------------- straight-line programs for the Hoare test


def random_linear_expr(rng: random.Random, names: list):
    def atom():
        if rng.random() < 0.5:
            return Var(rng.choice(names))
        return IntLit(rng.randint(-2, 2))

    e = atom()
    for _ in range(rng.randrange(0, 2)):
        e = Bin(rng.choice(("+", "-")), e, atom())
    return e


def random_cond(rng: random.Random, names: list):
    return Bin(rng.choice(("<", "<=", ">", ">=", "==")),
               random_linear_expr(rng, names), random_linear_expr(rng, names))


def random_straightline(rng: random.Random, names: list, depth: int = 2) -> list:
    out = []
    for _ in range(rng.randrange(1, 4)):
        if depth > 0 and rng.random() < 0.3:
            then = random_straightline(rng, names, depth - 1) + [Skip()]
            els = random_straightline(rng, names, depth - 1) + [Skip()]
            out.append(If(random_cond(rng, names),
                          ast.seq_of(then), ast.seq_of(els)))
        else:
            out.append(Assign(None, Var(rng.choice(names)),
                              random_linear_expr(rng, names)))
    return out


def run_straightline(stmts: list, sigma: dict):
    """Concrete big-step execution of assignments/ifs/skip/return."""
    st = ObjectState(FMap(sigma), FMap())
    result = None
    for s in _flatten(stmts):
        if isinstance(s, Skip):
            continue
        if isinstance(s, Assign):
            v = eval_expr(s.rhs, st)
            assert v is not None
            st = st.set_var(s.target.name, v)
        elif isinstance(s, If):
            g = eval_expr(s.cond, st)
            branch = s.then if g else s.els
            sub_sigma = dict(st.sigma.items())
            st2, result2 = run_straightline(stmt_list(branch), sub_sigma)
            st = st2
            if result2 is not None:
                return st, result2
        elif isinstance(s, Return):
            return st, eval_expr(s.e, st)
        else:
            raise AssertionError(s)
    return st, result


def _flatten(stmts):
    out = []
    for s in stmts:
        out.extend(stmt_list(s))
    return out


def random_fos_cond(rng: random.Random, names: list):
    def atom():
        l = FProg(rng.choice(names))
        r = FLit(rng.randint(-2, 2)) if rng.random() < 0.6 \
            else FProg(rng.choice(names))
        return FCmp(rng.choice(("<", "<=", ">", ">=")), l, r)

    f = atom()
    for _ in range(rng.randrange(0, 2)):
        g = atom()
        f = FAnd(f, g) if rng.random() < 0.6 else FOr(f, g)
    if rng.random() < 0.2:
        f = FNot(f)
    return f
