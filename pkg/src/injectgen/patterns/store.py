"""Edit patterns, their scores, and the versioned JSON pattern file."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from ..syntax import AstNode
from . import template as tpl

FORMAT_VERSION = 1


class UnboundHole(ValueError):
    pass


@dataclass(frozen=True)
class PatternScore:
    s_preval: int
    s_spec: Fraction
    s_ident: int

    @property
    def s_rank(self) -> Fraction:
        return self.s_preval * self.s_spec * self.s_ident

    def to_json(self) -> dict:
        return {"s_preval": self.s_preval, "s_spec": str(self.s_spec),
                "s_ident": self.s_ident, "s_rank": str(self.s_rank)}

    @classmethod
    def from_json(cls, d: dict) -> "PatternScore":
        return cls(int(d["s_preval"]), Fraction(d["s_spec"]), int(d["s_ident"]))


@dataclass
class EditPattern:
    id: str
    lhs: AstNode
    rhs: AstNode | None  # None is the EMPTY template: delete the matched statement
    vuln_type: str
    provenance: dict = field(default_factory=lambda: {"kind": "mined"})
    scores: PatternScore | None = None
    source: str | None = None

    def __post_init__(self):
        unbound = set(tpl.holes_in(self.rhs)) - set(tpl.holes_in(self.lhs))
        if unbound:
            raise UnboundHole(f"pattern {self.id}: holes {sorted(unbound)} not bound by lhs")

    @property
    def key(self) -> tuple[str, str]:
        """Structural identity used for de-duplication."""
        return tpl.dumps(self.lhs), tpl.dumps(self.rhs)

    @property
    def is_deletion(self) -> bool:
        return self.rhs is None

    @property
    def text(self) -> str:
        rhs = tpl.EMPTY if self.rhs is None else tpl.render(self.rhs)
        return f"{tpl.render(self.lhs)} => {rhs}"

    @property
    def rank(self) -> Fraction:
        return self.scores.s_rank if self.scores else Fraction(0)

    def to_json(self) -> dict:
        d = {"id": self.id, "lhs": tpl.dumps(self.lhs), "rhs": tpl.dumps(self.rhs),
             "vuln_type": self.vuln_type, "provenance": self.provenance,
             "scores": self.scores.to_json() if self.scores else None}
        if self.source:
            d["source"] = self.source
        return d

    @classmethod
    def from_json(cls, d: dict) -> "EditPattern":
        return cls(
            id=d["id"], lhs=tpl.loads(d["lhs"]), rhs=tpl.loads(d["rhs"]),
            vuln_type=d["vuln_type"], provenance=d.get("provenance", {"kind": "mined"}),
            scores=PatternScore.from_json(d["scores"]) if d.get("scores") else None,
            source=d.get("source"),
        )

    @classmethod
    def from_text(cls, pid: str, text: str, vuln_type: str, provenance: dict | None = None) -> "EditPattern":
        """Build from ``"lhs => rhs"`` text such as ``"*free*(h0); => EMPTY"``."""
        left, right = text.split("=>", 1) if "=>" in text else (text, tpl.EMPTY)
        # "=>" may not appear inside C code, but ">=" can: split on the arrow only
        lhs = tpl.parse_template(left)
        if lhs is None:
            raise ValueError("lhs may not be EMPTY")
        return cls(pid, lhs, tpl.parse_template(right), vuln_type,
                   provenance or {"kind": "manual"}, source=text)


def dumps_patterns(patterns: list[EditPattern]) -> str:
    doc = {"version": FORMAT_VERSION, "patterns": [p.to_json() for p in patterns]}
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def loads_patterns(text: str) -> list[EditPattern]:
    doc = json.loads(text)
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported pattern file version {doc.get('version')!r}")
    return [EditPattern.from_json(d) for d in doc["patterns"]]


def save_patterns(patterns: list[EditPattern], path: str | Path) -> None:
    Path(path).write_text(dumps_patterns(patterns), encoding="utf-8")


def load_patterns(path: str | Path) -> list[EditPattern]:
    return loads_patterns(Path(path).read_text(encoding="utf-8"))
