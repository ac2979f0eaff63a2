"""Randomized cross-validation: the direct matcher agrees with evaluating the
type's trace-formula translation wherever the latter is definite."""

import random

import pytest

from cao.matcher import match_trace
from cao.mso import MsoEval
from cao.translate import alpha_met

from helpers import has_star, random_trace, random_type

ROLES = {"S": "S"}


def xval_pairs(n_pairs: int, seed: int = 2024, subset_cap: int = 16):
    """Yields (trace, type, matcher verdict, translation verdict) with the
    translation verdict possibly None (indefinite)."""
    rng = random.Random(seed)
    produced = 0
    while produced < n_pairs:
        L = random_type(rng, rng.randint(0, 4))
        # star types enumerate subsets of positions: keep those traces at a
        # size where the enumeration is exhaustive and fast
        max_pos = 9 if has_star(L) else 15
        th = random_trace(rng, rng.choice((3, 5, 7, max_pos)))
        psi = alpha_met(L, ROLES)
        ev = MsoEval(th, subset_cap=subset_cap)
        av = ev.eval(psi)
        mv = match_trace(th, L, ROLES)
        produced += 1
        yield th, L, mv, av


def run_xval(n_pairs: int, seed: int = 2024):
    disagreements = []
    definite = accepts = 0
    for th, L, mv, av in xval_pairs(n_pairs, seed):
        if av is None:
            continue
        definite += 1
        if av is True:
            accepts += 1
        if mv != av:
            disagreements.append((th, L, mv, av))
    return disagreements, definite, accepts


def test_cross_validation_small():
    disagreements, definite, accepts = run_xval(250, seed=7)
    assert not disagreements, disagreements[:3]
    # both outcomes must actually occur for the comparison to mean anything
    assert definite > 200
    assert 0 < accepts < definite


def test_cross_validation_star_heavy():
    rng = random.Random(77)
    from cao.btypes import SeqT, StarT

    checked = 0
    for _ in range(60):
        inner = random_type(rng, 1, allow_star=False)
        L = SeqT(StarT(inner), random_type(rng, 1, allow_star=False))
        th = random_trace(rng, 9)
        av = MsoEval(th).eval(alpha_met(L, ROLES))
        mv = match_trace(th, L, ROLES)
        if av is not None:
            assert mv == av, (th, L)
            checked += 1
    assert checked >= 50
