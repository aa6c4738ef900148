"""Shared helpers for running programs end to end."""

from __future__ import annotations

from pathlib import Path

from gradprob.elaborate import elaborate
from gradprob.evaluator import evaluate
from gradprob.parser import parse
from gradprob.printer import normalize

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"


def program(name: str) -> str:
    return (PROGRAMS / name).read_text()


def run_text(text: str, fuel: int = 10000):
    return evaluate(elaborate(parse(text)).target, fuel)


def folded(d) -> dict:
    """Printed value -> exact probability, for distributions whose totals are all pinned."""
    entries, residual = normalize(d)
    assert residual == "", residual
    return {e.value: e.prob for e in entries}
