"""Differential validation of the runtime against an independent direct
interpreter: the multiset of (object, event) step sequences must coincide
exactly, outcome by outcome."""

import pytest

from cao.globalsem import ExploreConfig, explore

from helpers import corpus_program
from reference_interp import reference_runs

# ema is excluded only for size (its 64 interleavings take a while through
# the path-enumerating reference); every feature it uses is covered below.
PROGRAMS = [
    "ping", "flagship", "flagship_nosignflip", "flagship_wrongcallee",
    "branchy", "positive", "rats", "twocalls", "lists", "selectability",
    "classfig", "awaitbool", "awaitfut", "runningm", "unresolved",
]


def _multiset(pairs):
    return sorted(((status, steps) for status, steps in pairs), key=repr)


@pytest.mark.parametrize("name", PROGRAMS)
def test_reference_agreement(name):
    prog = corpus_program(name)
    res = explore(prog, ExploreConfig(step_bound=300, dedup=False))
    mine = _multiset([(r.status, r.steps) for r in
                      res.runs + res.stuck + res.truncated])
    ref = _multiset(reference_runs(prog, step_bound=300))
    assert mine == ref, (
        f"{name}: {len(mine)} vs {len(ref)} outcomes",
        mine[:1], ref[:1])


def test_reference_agreement_ema():
    prog = corpus_program("ema")
    res = explore(prog, ExploreConfig(step_bound=300, dedup=False))
    mine = _multiset([(r.status, r.steps) for r in
                      res.runs + res.stuck + res.truncated])
    ref = _multiset(reference_runs(prog, step_bound=300))
    assert len(mine) == len(ref)
    assert mine == ref
