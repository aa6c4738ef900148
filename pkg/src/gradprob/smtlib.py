"""SMT-LIB2 emission and an external-solver bridge."""

from __future__ import annotations

import os
import re
import subprocess
import tempfile
from fractions import Fraction
from typing import Dict, Iterable

from . import formula as F


def _key(x: str):
    head = x.rstrip("0123456789")
    tail = x[len(head):]
    return (head, int(tail) if tail else -1, x)


def _sym(x: str) -> str:
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", x):
        return x
    return "|" + x.replace("|", "_") + "|"


def num(c: Fraction) -> str:
    c = Fraction(c)
    if c < 0:
        return f"(- {num(-c)})"
    if c.denominator == 1:
        return f"{c.numerator}.0"
    return f"(/ {c.numerator} {c.denominator})"


def term(e: F.Expr) -> str:
    match e:
        case F.Const(v):
            return num(v)
        case F.Var(x):
            return _sym(x)
        case F.Add(a, b):
            return f"(+ {term(a)} {term(b)})"
        case F.Sub(a, b):
            return f"(- {term(a)} {term(b)})"
        case F.Mul(a, b):
            return f"(* {term(a)} {term(b)})"
        case F.Div(a, b):
            return f"(/ {term(a)} {term(b)})"
    raise TypeError(e)


def atom(a: F.Formula) -> str:
    op = {F.Eq: "=", F.Leq: "<=", F.Lt: "<"}[type(a)]
    return f"({op} {term(a.left)} {term(a.right)})"


def formula(f: F.Formula) -> str:
    parts = [atom(a) for a in F.atoms(f)]
    if not parts:
        return "true"
    if len(parts) == 1:
        return parts[0]
    return "(and " + " ".join(parts) + ")"


def _denominators(f: F.Formula) -> list:
    out = []

    def walk(e):
        if isinstance(e, (F.Add, F.Sub, F.Mul, F.Div)):
            walk(e.left)
            walk(e.right)
            if isinstance(e, F.Div) and not isinstance(e.right, F.Const):
                out.append(e.right)

    for a in F.atoms(f):
        walk(a.left)
        walk(a.right)
    return out


def _bounds(xs) -> str:
    return " ".join(f"(<= 0.0 {_sym(x)}) (<= {_sym(x)} 1.0)" for x in xs)


def emit_exists(phi: F.Formula) -> str:
    """QF_NRA script: one declaration and bound per variable, one assert per conjunct."""
    xs = sorted(F.free_vars(phi), key=_key)
    lines = ["(set-logic QF_NRA)"]
    for x in xs:
        lines.append(f"(declare-fun {_sym(x)} () Real)")
    for x in xs:
        lines.append(f"(assert (and (<= 0.0 {_sym(x)}) (<= {_sym(x)} 1.0)))")
    for d in _denominators(phi):
        lines.append(f"(assert (not (= {term(d)} 0.0)))")
    for a in F.atoms(phi):
        lines.append(f"(assert {atom(a)})")
    lines += ["(check-sat)", "(get-model)"]
    return "\n".join(lines) + "\n"


def emit_forall_exists(universal: Iterable[str], hypothesis: F.Formula,
                       existential: Iterable[str], conclusion: F.Formula) -> str:
    """NRA script for ∀U. (U ∈ [0,1] ∧ H) ⟹ ∃E. (E ∈ [0,1] ∧ C)."""
    us = sorted(set(universal) | F.free_vars(hypothesis), key=_key)
    es = sorted(set(existential) - set(us), key=_key)
    concl = formula(conclusion)
    if es:
        decl = " ".join(f"({_sym(x)} Real)" for x in es)
        concl = f"(exists ({decl}) (and {_bounds(es)} {concl}))"
    hyp = formula(hypothesis)
    body = f"(=> (and {_bounds(us)} {hyp}) {concl})" if us else f"(=> {hyp} {concl})"
    if us:
        decl = " ".join(f"({_sym(x)} Real)" for x in us)
        body = f"(forall ({decl}) {body})"
    return "\n".join(["(set-logic NRA)", f"(assert {body})", "(check-sat)"]) + "\n"


_MODEL_RE = re.compile(r"\(define-fun\s+(\|[^|]*\||\S+)\s+\(\)\s+Real\s+(.+?)\)\s*(?=\(define-fun|\)\s*$)",
                       re.S)


def _parse_value(text: str) -> Fraction:
    text = text.strip()
    if text.startswith("("):
        toks = text.replace("(", " ( ").replace(")", " ) ").split()

        def parse(i):
            if toks[i] == "(":
                op = toks[i + 1]
                args = []
                i += 2
                while toks[i] != ")":
                    v, i = parse(i)
                    args.append(v)
                if op == "/":
                    return args[0] / args[1], i + 1
                if op == "-":
                    return (-args[0] if len(args) == 1 else args[0] - args[1]), i + 1
                raise ValueError(op)
            return Fraction(toks[i]), i + 1

        return parse(0)[0]
    return Fraction(text)


def parse_model(text: str) -> Dict[str, Fraction]:
    out = {}
    for name, value in _MODEL_RE.findall(text):
        try:
            out[name.strip("|")] = _parse_value(value)
        except (ValueError, ZeroDivisionError, IndexError):
            pass
    return out


def run_external(script: str, solver):
    """Run `<path> <script file>` and map its first answer line to a SolveResult."""
    from .solver import SolveResult, unknown
    if not solver.path:
        return unknown("no external solver configured")
    fd, path = tempfile.mkstemp(suffix=".smt2")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(script)
        try:
            proc = subprocess.run([solver.path, path], capture_output=True, text=True,
                                  timeout=solver.timeout_ms / 1000)
        except subprocess.TimeoutExpired:
            return unknown("external solver timed out")
        except OSError as e:
            return unknown(f"external solver failed to start: {e}")
    finally:
        os.unlink(path)
    lines = proc.stdout.strip().splitlines()
    head = lines[0].strip() if lines else ""
    if head == "sat":
        return SolveResult("sat", parse_model("\n".join(lines[1:])))
    if head == "unsat":
        return SolveResult("unsat")
    return unknown(f"external solver answered {head or 'nothing'}")
