"""`gradprob check|elaborate|run|compare|solve <file>`.

Exit codes: 0 ok, 1 type error, 2 runtime cast error, 3 fuel exhausted,
4 solver unknown, 5 parse error.  Only the distribution semantics is
implemented; sampling one path at a time cannot enforce distribution
ascriptions, so there is no sampling mode.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

from . import formula as F
from . import solver as S
from .checker import TypeCheckError, typecheck_gplc
from .elaborate import ElaborationBug, elaborate
from .evaluator import Converged, FuelExhausted, Stuck, Undecided, evaluate, has_error_mass
from .parser import ParseError, parse
from .precision import source_precise
from .printer import show_target, show_type
from .report import Report, distribution_fields, text_entries


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _parse_file(path: str, command: str):
    try:
        return parse(_read(path)), None
    except ParseError as e:
        extra = {"error": {"message": e.message, "span": str(e.span) if e.span else None,
                           "hint": e.hint}}
        return None, Report(command, "parse-error", extra=extra)


def _type_error(command: str, e: TypeCheckError) -> Report:
    d = e.diagnostic
    status = "unknown" if d.kind == "solver-unknown" else "type-error"
    extra = {"diagnostic": d.as_dict()}
    if d.query:
        extra["query"] = d.query
    return Report(command, status, extra=extra)


def _stats() -> dict:
    return S.current().stats.as_dict()


# ------------------------------------------------------------------ commands


def cmd_check(args) -> Report:
    m, err = _parse_file(args.file, "check")
    if err:
        return err
    try:
        g = typecheck_gplc(m)
    except TypeCheckError as e:
        return _type_error("check", e)
    return Report("check", "ok", show_type(g), {"solver": _stats()})


def cmd_elaborate(args) -> Report:
    m, err = _parse_file(args.file, "elaborate")
    if err:
        return err
    try:
        out = elaborate(m)
    except TypeCheckError as e:
        return _type_error("elaborate", e)
    return Report("elaborate", "ok", show_type(out.ty),
                  {"target": show_target(out.target), "solver": _stats()})


def cmd_run(args) -> Report:
    m, err = _parse_file(args.file, "run")
    if err:
        return err
    try:
        out = elaborate(m)
    except TypeCheckError as e:
        return _type_error("run", e)
    except ElaborationBug as e:
        return Report("run", "runtime-error", extra={"error": f"internal: {e}"})
    ty = show_type(out.ty)
    r = evaluate(out.target, args.fuel)
    base = {"fuel": args.fuel}
    if isinstance(r, FuelExhausted):
        return Report("run", "fuel", ty, {**base, "solver": _stats()})
    if isinstance(r, Undecided):
        return Report("run", "unknown", ty, {**base, "error": r.reason, "query": r.query,
                                             "solver": _stats()})
    if isinstance(r, Stuck):
        return Report("run", "runtime-error", ty, {**base, "error": f"internal: stuck: "
                                                   f"{r.description}", "solver": _stats()})
    assert isinstance(r, Converged)
    try:
        failed = has_error_mass(r.value)
        fields = distribution_fields(r.value)
    except S.SolverUnknown as e:
        return Report("run", "unknown", ty, {**base, "error": e.reason, "solver": _stats()})
    status = "runtime-error" if failed else "ok"
    return Report("run", status, ty, {**base, "steps": r.steps, **fields, "solver": _stats()})


def cmd_compare(args) -> Report:
    a, err = _parse_file(args.file, "compare")
    if err:
        return err
    b, err = _parse_file(args.other, "compare")
    if err:
        return err
    try:
        ab, ba = source_precise(a, b), source_precise(b, a)
    except S.SolverUnknown as e:
        return Report("compare", "unknown", extra={"error": e.reason})
    return Report("compare", "ok", extra={"a_le_b": ab, "b_le_a": ba, "solver": _stats()})


def cmd_solve(args) -> Report:
    """Record the SMT-LIB text of every query that `check` or `run` issues."""
    m, err = _parse_file(args.file, "solve")
    if err:
        return err
    solver = S.current()
    solver.transcript = []
    status = "ok"
    try:
        out = elaborate(m)
        if args.phase == "run":
            r = evaluate(out.target, args.fuel)
            status = {FuelExhausted: "fuel", Undecided: "unknown",
                      Stuck: "runtime-error"}.get(type(r), "ok")
    except TypeCheckError as e:
        status = _type_error("solve", e).status
    queries, solver.transcript = solver.transcript, None
    return Report("solve", status, extra={"phase": args.phase, "queries": queries})


COMMANDS = {"check": cmd_check, "elaborate": cmd_elaborate, "run": cmd_run,
            "compare": cmd_compare, "solve": cmd_solve}


# ------------------------------------------------------------------- output


def render_text(rep: Report) -> str:
    d = rep.as_dict()
    lines = [f"status: {rep.status}"]
    if rep.type is not None:
        lines.append(f"type: {rep.type}")
    if "error" in d:
        err = d["error"]
        if isinstance(err, dict):
            lines.append(f"parse error at {err['span']}: {err['message']}")
            if err.get("hint"):
                lines.append(f"  hint: {err['hint']}")
        else:
            lines.append(f"error: {err}")
    if "diagnostic" in d:
        diag = d["diagnostic"]
        where = f" at {diag['span']}" if diag["span"] else ""
        lines.append(f"{diag['kind']}{where}: {diag['message']}")
        for t in diag["types"]:
            lines.append(f"  {t}")
    if "target" in d:
        lines.append(d["target"])
    if "entries" in d:
        lines.append(text_entries(d["entries"]))
        for e in d["entries"]:
            if "range" in e:
                lines.append(f"  {e['value']}: {e['symbolic']} in [{e['range'][0]}, {e['range'][1]}]")
        if d["residual"]:
            lines.append(f"  where {d['residual']}")
    if "a_le_b" in d:
        lines.append(f"a <= b: {str(d['a_le_b']).lower()}")
        lines.append(f"b <= a: {str(d['b_le_a']).lower()}")
    if "queries" in d:
        for i, q in enumerate(d["queries"], start=1):
            lines.append(f"; query {i}")
            lines.append(q.rstrip())
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gradprob",
                                description="Gradual probabilistic lambda calculus")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("file")
        if name == "compare":
            c.add_argument("other")
        if name == "solve":
            c.add_argument("--phase", choices=("check", "run"), default="check")
        c.add_argument("--fuel", type=int, default=10000)
        c.add_argument("--format", choices=("json", "text"), default="text")
        c.add_argument("--solver", default=os.environ.get("GRADPROB_SOLVER", "builtin"))
        c.add_argument("--solver-timeout-ms", type=int, default=5000)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.fuel < 1:
        print("gradprob: --fuel must be at least 1", file=sys.stderr)
        return 5
    try:
        solver = S.Solver.parse(args.solver, args.solver_timeout_ms)
    except ValueError as e:
        print(f"gradprob: {e}", file=sys.stderr)
        return 5
    try:
        with S.using(solver), F.session():
            rep = COMMANDS[args.command](args)
    except OSError as e:
        print(f"gradprob: {e}", file=sys.stderr)
        return 5
    if args.format == "json":
        print(json.dumps(rep.as_dict(), indent=2))
    else:
        print(render_text(rep))
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
