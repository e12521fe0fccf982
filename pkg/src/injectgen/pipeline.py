"""Production: locate a context in each normal function, apply the first ranked
pattern that matches there, and emit the vulnerable variant with its location.

Functions fan out over a process pool; results are written by a single writer
in input order, so the dataset does not depend on the worker count.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .code_model import SourceUnit
from .contextualize import ContextPrediction, NoStatement, rule_based_locate
from .patterns.match import ApplyError, MatchBinding, apply, match, revert_check
from .patterns.store import EditPattern
from .syntax import Ast, AstNode, ParseError, parse_function

log = logging.getLogger(__name__)

RULE, MODEL = "rule_based", "model"

# discard reasons
UNRESOLVED = "unresolved_location"
NO_MATCH = "no_pattern_matched"
REVERT_FAILED = "revert_check_failed"

Locator = Callable[[SourceUnit, Ast], ContextPrediction]


class PipelineIOError(OSError):
    """Writing the dataset failed; a partial-output manifest was left behind."""

    def __init__(self, message: str, manifest: Path):
        super().__init__(message)
        self.manifest = manifest


class UnrankedPatterns(ValueError):
    pass


@dataclass
class GeneratedSample:
    normal_code: str
    vulnerable_code: str
    injected_lines: tuple[int, int]
    normal_lines: tuple[int, int]
    vuln_type: str
    pattern_id: str
    project_id: str
    contextualizer: str
    edit: dict = field(default_factory=dict)

    def to_record(self, sample_id: str, unit: SourceUnit) -> dict:
        return {
            "id": sample_id,
            "project": self.project_id,
            "normal": self.normal_code,
            "vulnerable": self.vulnerable_code,
            "lines": list(self.injected_lines),
            "vuln_type": self.vuln_type,
            "pattern_id": self.pattern_id,
            "contextualizer": self.contextualizer,
            "path": unit.path,
            "function": unit.function_name,
            "normal_lines": list(self.normal_lines),
            "edit": self.edit,
        }


@dataclass
class Outcome:
    """What happened to one input function."""
    parsed: bool
    located: bool = False
    matched: bool = False
    sample: GeneratedSample | None = None
    reason: str | None = None


def check_ranked(patterns: Sequence[EditPattern]) -> None:
    """Scored patterns must come in non-ascending rank order."""
    ranks = [p.rank for p in patterns if p.scores is not None]
    for a, b in zip(ranks, ranks[1:]):
        if b > a:
            raise UnrankedPatterns("patterns are not ordered by rank")


def rule_locator(unit: SourceUnit, ast: Ast) -> ContextPrediction:
    return rule_based_locate(ast)


def model_locator(model) -> Locator:
    from .model.locate import locate

    def run(unit: SourceUnit, ast: Ast) -> ContextPrediction:
        return locate(unit, model)
    return run


def context_span(ast: Ast, stmt: AstNode, pattern: EditPattern) -> tuple[int, int]:
    """The located statement, widened to its enclosing ``if`` for if-shaped patterns."""
    if pattern.lhs.node_type != "if_statement":
        return stmt.span
    parents = ast.parent_map()
    node = stmt
    while node is not None and node.node_type != "if_statement":
        node = parents.get(id(node))
    return node.span if node is not None else stmt.span


def bindings_in_context(pattern: EditPattern, ast: Ast, stmt: AstNode) -> list[MatchBinding]:
    lo, hi = context_span(ast, stmt, pattern)
    hits = [b for b in match(pattern, ast) if lo <= b.span[0] and b.span[1] <= hi]
    return sorted(hits, key=lambda b: b.span)


def _locate_statement(ast: Ast, prediction: ContextPrediction) -> AstNode | None:
    if not prediction.resolved:
        return None
    k, _ = prediction.resolved_span
    stmts = ast.statements()
    return stmts[k] if k < len(stmts) else None


def run_one(unit: SourceUnit, locator: Locator, patterns: Sequence[EditPattern],
            contextualizer: str = RULE) -> Outcome:
    try:
        ast = parse_function(unit.text)
    except ParseError:
        return Outcome(parsed=False, reason="parse_error")
    try:
        prediction = locator(unit, ast)
    except NoStatement:
        return Outcome(parsed=True, reason=UNRESOLVED)
    stmt = _locate_statement(ast, prediction)
    if stmt is None:
        return Outcome(parsed=True, reason=UNRESOLVED)
    for pattern in patterns:
        hits = bindings_in_context(pattern, ast, stmt)
        if not hits:
            continue
        binding = hits[0]
        try:
            applied = apply(binding, pattern, ast)
        except ApplyError as exc:
            log.debug("%s: %s does not apply: %s", unit.function_name, pattern.id, exc)
            continue
        vulnerable = applied.ast.text
        if not revert_check(unit.text, vulnerable, applied.edit, pattern, binding):
            return Outcome(parsed=True, located=True, matched=True, reason=REVERT_FAILED)
        sample = GeneratedSample(
            normal_code=unit.text,
            vulnerable_code=vulnerable,
            injected_lines=applied.edit.lines,
            normal_lines=applied.edit.normal_lines,
            vuln_type=pattern.vuln_type,
            pattern_id=pattern.id,
            project_id=unit.project_id,
            contextualizer=contextualizer,
            edit=applied.edit.to_json(),
        )
        return Outcome(parsed=True, located=True, matched=True, sample=sample)
    return Outcome(parsed=True, located=True, reason=NO_MATCH)


def generate(unit: SourceUnit | str, locator: Locator | None, ranked_patterns: Sequence[EditPattern],
             contextualizer: str = RULE) -> GeneratedSample | None:
    """One vulnerable sample for ``unit``, or None when it is discarded.

    Parse errors propagate as :class:`ParseError`.
    """
    if isinstance(unit, str):
        unit = SourceUnit("", "", "", unit)
    check_ranked(ranked_patterns)
    parse_function(unit.text)
    return run_one(unit, locator or rule_locator, ranked_patterns, contextualizer).sample


# -- corpus runs ---------------------------------------------------------------------

@dataclass
class RunReport:
    input: int = 0
    parsed: int = 0
    located: int = 0
    matched: int = 0
    emitted: int = 0
    discarded: Counter = field(default_factory=Counter)
    rejected: Counter = field(default_factory=Counter)

    def add(self, outcome: Outcome) -> None:
        self.input += 1
        if not outcome.parsed:
            self.rejected[outcome.reason] += 1
            return
        self.parsed += 1
        self.located += outcome.located
        self.matched += outcome.matched
        if outcome.sample is not None:
            self.emitted += 1
        else:
            self.discarded[outcome.reason] += 1

    @property
    def reconciled(self) -> bool:
        return self.emitted + sum(self.discarded.values()) == self.parsed

    def to_json(self) -> dict:
        return {"input": self.input, "parsed": self.parsed, "located": self.located,
                "matched": self.matched, "emitted": self.emitted,
                "discarded": dict(sorted(self.discarded.items())),
                "rejected": dict(sorted(self.rejected.items()))}


# per-process state, set once by the pool initializer
_WORKER: dict = {}


def _init_worker(patterns_json: list[dict], contextualizer: str, checkpoint: str | None) -> None:
    _WORKER["patterns"] = [EditPattern.from_json(d) for d in patterns_json]
    _WORKER["contextualizer"] = contextualizer
    if contextualizer == MODEL:
        import torch

        from .model.checkpoint import load_checkpoint
        torch.set_num_threads(1)
        _WORKER["locator"] = model_locator(load_checkpoint(checkpoint))
    else:
        _WORKER["locator"] = rule_locator


def _work(unit: SourceUnit) -> Outcome:
    return run_one(unit, _WORKER["locator"], _WORKER["patterns"], _WORKER["contextualizer"])


def _write_record(fh, record: dict) -> None:
    fh.write(json.dumps(record, sort_keys=True) + "\n")


def generate_corpus(units: Iterable[SourceUnit], patterns: Sequence[EditPattern], out_path: str | Path,
                    contextualizer: str = RULE, checkpoint: str | Path | None = None,
                    workers: int = 1, model=None) -> RunReport:
    """Stream samples for ``units`` to ``out_path`` (JSONL) in input order.

    ``model`` may be passed for in-process runs; pooled runs load ``checkpoint``
    in every worker instead.
    """
    check_ranked(patterns)
    if contextualizer == MODEL and model is None and checkpoint is None:
        raise ValueError("model contextualizer needs a model or a checkpoint")
    units = list(units)
    out_path = Path(out_path)
    report = RunReport()
    if workers <= 1:
        locator = rule_locator if contextualizer == RULE else \
            model_locator(model if model is not None else _load(checkpoint))
        outcomes = (run_one(u, locator, patterns, contextualizer) for u in units)
        pool = None
    else:
        pool = ProcessPoolExecutor(
            max_workers=workers, mp_context=get_context("spawn"), initializer=_init_worker,
            initargs=([p.to_json() for p in patterns], contextualizer,
                      str(checkpoint) if checkpoint else None))
        chunk = max(1, len(units) // (workers * 4))
        outcomes = pool.map(_work, units, chunksize=chunk)
    written = 0
    try:
        with open(out_path, "w", encoding="utf-8") as fh:
            for index, (unit, outcome) in enumerate(zip(units, outcomes)):
                report.add(outcome)
                if outcome.sample is not None:
                    _write_record(fh, outcome.sample.to_record(f"{index:07d}", unit))
                    written += 1
    except OSError as exc:
        manifest = out_path.with_name(out_path.name + ".partial.json")
        with open(manifest, "w", encoding="utf-8") as mf:
            json.dump({"dataset": str(out_path), "complete": False, "records_written": written,
                       "inputs_seen": report.input, "error": str(exc)}, mf, indent=1, sort_keys=True)
        raise PipelineIOError(f"writing {out_path} failed: {exc}", manifest) from exc
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return report


def _load(checkpoint):
    from .model.checkpoint import load_checkpoint
    return load_checkpoint(checkpoint)
