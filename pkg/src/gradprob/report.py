"""Machine-readable result documents (JSON schema 1)."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

from .printer import Entry, normalize

SCHEMA = 1

EXIT = {"ok": 0, "type-error": 1, "runtime-error": 2, "fuel": 3, "unknown": 4, "parse-error": 5}


def rational(x: Optional[Fraction]) -> Optional[str]:
    """`num/den`, never a decimal."""
    if x is None:
        return None
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def entry_dict(e: Entry) -> dict:
    out = {"value": e.value, "prob": rational(e.prob)}
    if not e.exact:
        out["symbolic"] = e.expr
        if e.low is not None:
            out["range"] = [rational(e.low), rational(e.high)]
    return out


@dataclass
class Report:
    command: str
    status: str
    type: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT[self.status]

    def as_dict(self) -> dict:
        out = {"schema": SCHEMA, "command": self.command, "status": self.status}
        if self.type is not None:
            out["type"] = self.type
        out.update(self.extra)
        return out


def distribution_fields(d) -> dict:
    entries, residual = normalize(d)
    return {"entries": [entry_dict(e) for e in entries], "residual": residual}


def text_entries(entries: List[dict]) -> str:
    parts = []
    for e in entries:
        p = e["prob"] if e["prob"] is not None else e["symbolic"]
        if p is not None and p.endswith("/1"):
            p = p[:-2]
        parts.append(f"{e['value']}^{p}")
    return "{" + ", ".join(parts) + "}"
