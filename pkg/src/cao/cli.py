"""Command-line entry point.

Subcommands: check, run, explore, mc, p2, prove, oracle. Exit codes: 0 on
success, 1 on refutation or violation, 2 on unknown (1 under --strict),
3 on usage errors. Diagnostics go to standard error as
``file:line:col: message``; set CAO_COLOR=1 to colorize them.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .btypes import parse_btype
from .calculus import PROVED, REFUTED, UNKNOWN, check_consistency, prove_all
from .frontend import load_program
from .globalsem import ExploreConfig, explore
from .logic_parser import parse_formula_file
from .matcher import match_trace, slice_after_invrev
from .mso import MsoEval
from .parser import CaoError
from .points_to import PointsTo
from .symbolic import pretty_expr
from .traces import pretty_trace, trace_to_json
from .values import value_to_json
from .btypes import role_binding
from .vc import vc_to_smtlib

EXIT_OK, EXIT_FAIL, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 3


def _color(msg: str, code: str) -> str:
    if os.environ.get("CAO_COLOR", "") in ("1", "always", "yes"):
        return f"\x1b[{code}m{msg}\x1b[0m"
    return msg


def _diag(msg: str):
    print(_color(msg, "31"), file=sys.stderr)


def _load(path: str):
    try:
        src = Path(path).read_text()
    except OSError as e:
        _diag(f"{path}: {e.strerror}")
        sys.exit(EXIT_USAGE)
    return load_program(src, path)


def _emit(data, as_json: bool, pretty_lines=None):
    if as_json:
        sys.stdout.write(json.dumps(data, indent=2, sort_keys=True) + "\n")
    else:
        for line in pretty_lines or []:
            sys.stdout.write(line + "\n")


def _chi_json(chi: dict):
    return {pretty_expr(k): value_to_json(v) for k, v in
            sorted(chi.items(), key=lambda kv: pretty_expr(kv[0]))}


def _run_json(run, seed):
    return {
        "status": run.status,
        "seed": seed,
        "events": [repr(ev) for _obj, ev in run.steps],
        "steps": [{"object": obj, "event": repr(ev)} for obj, ev in run.steps],
        "gamma": [
            {"heaps": {name: {f: value_to_json(v) for f, v in rho.items()}
                       for name, rho in el.items()}}
            if not isinstance(el, tuple) and hasattr(el, "items")
            else {"event": repr(el)}
            for el in run.gamma
        ],
        "processes": [
            {"object": pr.obj, "method": pr.method, "future": pr.future,
             "chi": _chi_json(pr.chi),
             "selected": [trace_to_json(t) for t in pr.selected]}
            for pr in run.finished
        ],
        "objects": {name: trace_to_json(t)
                    for name, t in sorted(run.object_traces.items())},
        "warnings": sorted(set(run.warnings)),
    }


def _explore_cfg(args) -> ExploreConfig:
    return ExploreConfig(step_bound=args.steps, unroll=args.unroll,
                         policy="random" if getattr(args, "random", False)
                         else "exhaustive",
                         seed=getattr(args, "seed", 0),
                         dedup=not getattr(args, "no_dedup", False),
                         max_runs=getattr(args, "max_runs", None))


# ------------------------------------------------------------------ commands


def cmd_check(args) -> int:
    prog = _load(args.file)
    pps = prog.program_points()
    lines = [f"{args.file}: ok ({len(prog.classes)} classes, "
             f"{len(list(prog.methods()))} methods)"]
    if args.verbose:
        for pp in sorted(pps):
            kind, _n = pps[pp]
            lines.append(f"  pp {pp}: {kind}")
    _emit({"ok": True, "classes": [c.name for c in prog.classes],
           "program_points": {str(pp): pps[pp][0] for pp in sorted(pps)}},
          args.json, lines)
    return EXIT_OK


def cmd_run(args) -> int:
    prog = _load(args.file)
    cfg = _explore_cfg(args)
    cfg.policy = "random"
    cfg.seed = args.seed
    res = explore(prog, cfg)
    run = (res.runs + res.stuck + res.truncated)[0]
    data = _run_json(run, args.seed)
    if args.json:
        _emit(data, True)
    else:
        lines = [f"status: {run.status}  (seed {args.seed})"]
        lines += [f"  {obj}: {ev!r}" for obj, ev in run.steps]
        for pr in run.finished:
            lines.append(f"process {pr.method} (future {pr.future}) on {pr.obj}:")
            for t in pr.selected:
                lines.append("  " + pretty_trace(t))
        _emit(None, False, lines)
    return EXIT_OK if run.status == "terminated" else EXIT_UNKNOWN


def cmd_explore(args) -> int:
    prog = _load(args.file)
    res = explore(prog, _explore_cfg(args))
    data = {
        "stats": dict(res.stats, runs=len(res.runs), stuck=len(res.stuck),
                      truncated=len(res.truncated)),
        "runs": [_run_json(r, None) for r in res.runs[:args.max_dump]],
    }
    lines = [f"terminated runs: {len(res.runs)}  stuck: {len(res.stuck)}  "
             f"truncated: {len(res.truncated)}",
             f"states visited: {res.stats['states']}  "
             f"transitions: {res.stats['transitions']}  "
             f"dedup hits: {res.stats['dedup_hits']}"]
    warn = sorted({w for r in res.runs + res.stuck + res.truncated
                   for w in r.warnings})
    lines += [f"warning: {w}" for w in warn]
    data["warnings"] = warn
    _emit(data, args.json, lines)
    if res.truncated:
        return EXIT_UNKNOWN
    return EXIT_OK


def cmd_mc(args) -> int:
    prog = _load(args.file)
    try:
        ff = parse_formula_file(Path(args.formula).read_text(), prog, args.formula)
    except OSError as e:
        _diag(f"{args.formula}: {e.strerror}")
        return EXIT_USAGE
    res = explore(prog, _explore_cfg(args))
    verdicts = []
    for r in res.runs:
        for pr in r.finished:
            if ff.method is not None and pr.method != ff.method:
                continue
            for t in pr.selected:
                ev = MsoEval(t, program=prog, subset_cap=args.subset_cap,
                             halo=args.halo)
                v = ev.eval(ff.formula)
                entry = {"method": pr.method, "object": pr.obj,
                         "future": pr.future,
                         "verdict": {True: "true", False: "false",
                                     None: "unknown"}[v],
                         "approximate": bool(ev.approx)}
                if entry not in verdicts:
                    verdicts.append(entry)
    data = {"formula": Path(args.formula).read_text().strip(),
            "method": ff.method, "verdicts": verdicts}
    lines = [f"{v['method']} fut{v['future']}: {v['verdict']}"
             + (" (approximate)" if v["approximate"] else "")
             for v in verdicts]
    if not verdicts:
        lines = ["no selected traces matched the target method"]
    _emit(data, args.json, lines)
    if any(v["verdict"] == "false" for v in verdicts):
        return EXIT_FAIL
    if any(v["verdict"] == "unknown" for v in verdicts):
        return EXIT_FAIL if args.strict else EXIT_UNKNOWN
    return EXIT_OK


def cmd_p2(args) -> int:
    prog = _load(args.file)
    table = PointsTo(prog).table()
    data = {"sites": {str(pp): sorted(ms) for pp, ms in table.items()}}
    lines = [f"get_{pp}: {{{', '.join(sorted(ms))}}}" for pp, ms in table.items()]
    _emit(data, args.json, lines)
    return EXIT_OK


def _load_btype(prog, path: str):
    try:
        src = Path(path).read_text()
    except OSError as e:
        _diag(f"{path}: {e.strerror}")
        sys.exit(EXIT_USAGE)
    return parse_btype(src, prog, path)


def cmd_prove(args) -> int:
    prog = _load(args.file)
    bt = _load_btype(prog, args.btype)
    verdicts, prover = prove_all(prog, bt, jobs=args.jobs)
    rep = check_consistency(prog, bt)
    if args.emit_smt:
        outdir = Path(args.emit_smt)
        outdir.mkdir(parents=True, exist_ok=True)
        for i, (label, gamma, phi, r) in enumerate(prover.vcs):
            name = f"vc{i:03d}"
            (outdir / f"{name}.smt2").write_text(
                vc_to_smtlib(gamma, phi, f"{name}: {label} [{r.status}]"))
    data = {"methods": [v.to_json() for v in verdicts],
            "consistency": rep.to_json(),
            "open_obligations": [o for v in verdicts for o in v.obligations]}
    lines = [f"{v.method}: {v.status}" for v in verdicts]
    lines.append(f"scheme consistency: "
                 f"{'consistent' if rep.consistent else 'inconsistent'}")
    for c in rep.checks:
        if c["status"] != "valid":
            lines.append(f"  call {c['caller']} -> {c['callee']}: {c['status']}"
                         + (f" witness {c.get('witness')}" if "witness" in c else ""))
    _emit(data, args.json, lines)
    statuses = [v.status for v in verdicts]
    if REFUTED in statuses or not rep.consistent:
        return EXIT_FAIL
    if UNKNOWN in statuses:
        return EXIT_FAIL if args.strict else EXIT_UNKNOWN
    return EXIT_OK


def cmd_oracle(args) -> int:
    prog = _load(args.file)
    bt = _load_btype(prog, args.btype)
    verdicts, _ = prove_all(prog, bt, jobs=args.jobs)
    rep = check_consistency(prog, bt)
    statuses = {v.method: v.status for v in verdicts}
    static_ok = all(s == PROVED for s in statuses.values()) and rep.consistent

    violations = []
    checked = 0
    cfgs = [_explore_cfg(args)]
    for seed in range(args.seeds):
        c = _explore_cfg(args)
        c.policy, c.seed = "random", seed
        cfgs.append(c)
    runs_total = 0
    for cfg in cfgs:
        res = explore(prog, cfg)
        runs_total += len(res.runs)
        for r in res.runs:
            for pr in r.finished:
                if pr.method not in bt.types:
                    continue
                proto = bt.types[pr.method]
                roles = role_binding(bt, prog, pr.method)
                for t in pr.selected:
                    checked += 1
                    v = match_trace(slice_after_invrev(t), proto.body, roles,
                                    prog, assumed=bt.assumes)
                    if v is False:
                        violations.append({
                            "method": pr.method, "future": pr.future,
                            "trace": pretty_trace(t)})
    data = {"methods": statuses, "consistent": rep.consistent,
            "static_ok": static_ok, "traces_checked": checked,
            "runs": runs_total, "violations": violations}
    lines = [f"{m}: {s}" for m, s in sorted(statuses.items())]
    lines.append(f"scheme: {'consistent' if rep.consistent else 'inconsistent'}")
    lines.append(f"checked {checked} selected traces over {runs_total} runs; "
                 f"{len(violations)} violation(s)")
    for v in violations:
        lines.append(f"  VIOLATION {v['method']} fut{v['future']}: {v['trace']}")
    _emit(data, args.json, lines)
    if violations or REFUTED in statuses.values() or not rep.consistent:
        return EXIT_FAIL
    if UNKNOWN in statuses.values():
        return EXIT_FAIL if args.strict else EXIT_UNKNOWN
    return EXIT_OK


# --------------------------------------------------------------------- main


def _common(sub, explore_opts=True):
    sub.add_argument("--json", action="store_true", help="JSON output")
    if explore_opts:
        sub.add_argument("--steps", type=int, default=10000,
                         help="global step bound (default 10000)")
        sub.add_argument("--unroll", type=int, default=8,
                         help="loop unroll budget (default 8)")
        sub.add_argument("--no-dedup", action="store_true",
                         help="disable state de-duplication")
        sub.add_argument("--max-runs", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cao",
        description="Verification workbench for the CAO active-object "
                    "language: trace semantics, trace logics and behavioral "
                    "method types.")
    p.add_argument("--version", action="version", version=f"cao {__version__}")
    subs = p.add_subparsers(dest="command", required=True)

    s = subs.add_parser("check", help="parse, type-check and well-formedness")
    s.add_argument("file")
    s.add_argument("-v", "--verbose", action="store_true",
                   help="list program points")
    _common(s, explore_opts=False)
    s.set_defaults(fn=cmd_check)

    s = subs.add_parser("run", help="one seeded run")
    s.add_argument("file")
    s.add_argument("--seed", type=int, default=0)
    _common(s)
    s.set_defaults(fn=cmd_run)

    s = subs.add_parser("explore", help="all terminated runs and statistics")
    s.add_argument("file")
    s.add_argument("--max-dump", type=int, default=50,
                   help="cap on runs included in JSON output")
    _common(s)
    s.set_defaults(fn=cmd_explore)

    s = subs.add_parser("mc", help="trace-formula verdicts over selected traces")
    s.add_argument("file")
    s.add_argument("formula")
    s.add_argument("--halo", type=int, default=8,
                   help="numeric quantifier halo (default 8)")
    s.add_argument("--subset-cap", type=int, default=16,
                   help="subset-quantifier cap (default 16)")
    s.add_argument("--strict", action="store_true")
    _common(s)
    s.set_defaults(fn=cmd_mc)

    s = subs.add_parser("p2", help="points-to table per get site")
    s.add_argument("file")
    _common(s, explore_opts=False)
    s.set_defaults(fn=cmd_p2)

    s = subs.add_parser("prove", help="check methods against their types")
    s.add_argument("file")
    s.add_argument("btype")
    s.add_argument("--strict", action="store_true",
                   help="treat unknown as failure")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--emit-smt", metavar="DIR",
                   help="export every VC as SMT-LIB v2")
    _common(s, explore_opts=False)
    s.set_defaults(fn=cmd_prove)

    s = subs.add_parser("oracle",
                        help="prove, explore, then match selected traces")
    s.add_argument("file")
    s.add_argument("btype")
    s.add_argument("--seeds", type=int, default=0,
                   help="additional seeded random schedules")
    s.add_argument("--strict", action="store_true")
    s.add_argument("--jobs", type=int, default=1)
    _common(s)
    s.set_defaults(fn=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help
        return EXIT_USAGE if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except CaoError as e:
        _diag(str(e))
        return EXIT_FAIL
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
