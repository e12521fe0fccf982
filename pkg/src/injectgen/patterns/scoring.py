"""Training pairs, pattern scores, ranking, and removal of over-general patterns."""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from pathlib import Path

from ..lexer import token_texts
from ..syntax import Ast, ParseError, parse_function
from . import template as tpl
from .antiunify import ConcreteEdit, Identical, extract_edit
from .match import ApplyError, apply, match
from .store import EditPattern, PatternScore

log = logging.getLogger(__name__)

IDENTIFIER_TERMINALS = frozenset({"identifier", "field_identifier", "type_identifier"})
DEFAULT_TOP_K = 300


@dataclass
class TrainingSample:
    """A normal/vulnerable function pair with the injected line range in ``normal``."""
    id: str
    normal: str
    vulnerable: str
    vuln_type: str
    lines: tuple[int, int] | None = None

    @cached_property
    def normal_ast(self) -> Ast:
        return parse_function(self.normal)

    @cached_property
    def vulnerable_ast(self) -> Ast:
        return parse_function(self.vulnerable)

    @cached_property
    def vulnerable_tokens(self) -> list[str]:
        return token_texts(self.vulnerable)

    def location(self) -> tuple[int, int]:
        if self.lines is None:
            before, _ = extract_edit(self.normal_ast, self.vulnerable_ast)
            self.lines = (before.line, before.end_line)
        return self.lines

    def edit(self) -> ConcreteEdit:
        before, after = extract_edit(self.normal_ast, self.vulnerable_ast)
        return ConcreteEdit(before, after, self.id, self.vuln_type)

    @classmethod
    def from_json(cls, d: dict) -> "TrainingSample":
        lines = tuple(d["lines"]) if d.get("lines") else None
        return cls(str(d["id"]), d["normal"], d["vulnerable"], d.get("vuln_type", "unknown"), lines)


def load_training(path: str | Path) -> list[TrainingSample]:
    with open(path, encoding="utf-8") as fh:
        return [TrainingSample.from_json(json.loads(line)) for line in fh if line.strip()]


def training_edits(samples: list[TrainingSample]) -> list[ConcreteEdit]:
    """Concrete edits of every usable pair; unparsable or identical pairs are skipped."""
    out = []
    for s in samples:
        try:
            out.append(s.edit())
        except (ParseError, Identical) as exc:
            log.info("training pair %s skipped: %s", s.id, exc)
    return out


# -- scores -----------------------------------------------------------------------

def injects_correctly(p: EditPattern, sample: TrainingSample) -> bool:
    """Applying ``p`` at the known location yields the vulnerable code token-for-token."""
    lo, hi = sample.location()
    for b in match(p, sample.normal_ast):
        if not lo <= b.site.line <= hi:
            continue
        try:
            out = apply(b, p, sample.normal_ast)
        except ApplyError:
            continue
        if token_texts(out.ast.text) == sample.vulnerable_tokens:
            return True
    return False


def s_preval(p: EditPattern, samples: list[TrainingSample]) -> int:
    return sum(1 for s in samples if injects_correctly(p, s))


def s_spec(p: EditPattern, samples: list[TrainingSample]) -> Fraction:
    """Reciprocal of the mean match count over samples with at least one match."""
    counts = [n for s in samples if (n := len(match(p, s.normal_ast)))]
    if not counts:
        return Fraction(0)
    return Fraction(len(counts), sum(counts))


def s_ident(p: EditPattern) -> int:
    return sum(1 for n in p.lhs.walk() if n.node_type in IDENTIFIER_TERMINALS or n.node_type == tpl.GLOB)


def score(p: EditPattern, samples: list[TrainingSample]) -> PatternScore:
    return PatternScore(s_preval(p, samples), s_spec(p, samples), s_ident(p))


def score_all(patterns: list[EditPattern], samples: list[TrainingSample]) -> list[EditPattern]:
    return [replace(p, scores=score(p, samples)) for p in patterns]


def _rank_key(p: EditPattern):
    sc = p.scores or PatternScore(0, Fraction(0), 0)
    return (-sc.s_rank, -sc.s_preval, p.id)


def filter_rank(patterns: list[EditPattern], k: int = DEFAULT_TOP_K) -> list[EditPattern]:
    """Order by rank (desc), then prevalence (desc), then id; keep the first ``k``."""
    return sorted(patterns, key=_rank_key)[:k]


# -- refinement ---------------------------------------------------------------------

def load_judgments(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def false_positive_rates(judgments: list[dict]) -> dict[str, Fraction]:
    totals: dict[str, int] = defaultdict(int)
    false: dict[str, int] = defaultdict(int)
    for j in judgments:
        if j["label"] not in ("tp", "fp"):
            raise ValueError(f"judgment label must be tp or fp, got {j['label']!r}")
        totals[j["pattern_id"]] += 1
        false[j["pattern_id"]] += j["label"] == "fp"
    return {pid: Fraction(false[pid], n) for pid, n in totals.items()}


def remove_overgeneral(patterns: list[EditPattern], judgments: list[dict]) -> list[EditPattern]:
    """Drop patterns whose applications are more than half false positives."""
    rates = false_positive_rates(judgments)
    kept = [p for p in patterns if rates.get(p.id, Fraction(0)) <= Fraction(1, 2)]
    log.info("removed %d over-general patterns", len(patterns) - len(kept))
    return kept


def false_negative_report(patterns: list[EditPattern], samples: list[TrainingSample]) -> dict[str, list[str]]:
    """Training samples no pattern injects correctly, grouped by vulnerability label."""
    report: dict[str, list[str]] = defaultdict(list)
    for s in samples:
        if not any(injects_correctly(p, s) for p in patterns):
            report[s.vuln_type].append(s.id)
    return dict(sorted(report.items()))
