"""Source units, AST linearization and the dual ``code [SEP] ast`` model input."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .syntax import Ast, AstNode, ParseError, parse_function

log = logging.getLogger(__name__)

SEP = "[SEP]"

# Node kinds kept by linearization: function/declaration/statement scaffolding.
# Everything at expression level and below is elided.
LINEARIZED_TYPES = frozenset({
    "function_definition", "function_declarator", "parameter_list", "parameter_declaration",
    "compound_statement", "declaration", "expression_statement", "empty_statement",
    "if_statement", "else_clause", "for_statement", "while_statement", "do_statement",
    "switch_statement", "case_statement", "return_statement", "break_statement",
    "continue_statement", "goto_statement", "labeled_statement",
})


@dataclass(frozen=True)
class SourceUnit:
    project_id: str
    path: str
    function_name: str
    text: str


@dataclass
class ModelInput:
    code_tokens: list[str]
    ast_tokens: list[str]
    var_occurrences: dict[int, str]
    token_lines: list[int] = field(default_factory=list)
    token_kinds: list[str] = field(default_factory=list)
    sep: str = SEP

    @property
    def sequence(self) -> list[str]:
        return [*self.code_tokens, self.sep, *self.ast_tokens]


def parse(unit: SourceUnit) -> Ast:
    return parse_function(unit.text)


def linearize(ast: Ast | AstNode) -> list[str]:
    root = ast.root if isinstance(ast, Ast) else ast
    return [n.node_type for n in root.walk() if n.node_type in LINEARIZED_TYPES]


def variable_terminals(root: AstNode) -> list[tuple[int, AstNode]]:
    """(terminal index, node) for every identifier terminal naming a variable.

    Callee names, the function's own name, type names, field names and labels
    are excluded; everything else read or written as a value counts.
    """
    excluded: set[int] = set()
    for node in root.walk():
        if node.node_type == "call_expression":
            callee = node.children[0]
            if callee.node_type == "identifier":
                excluded.add(id(callee))
    decl = root.child("declarator")
    while decl is not None and decl.node_type in ("pointer_declarator", "function_declarator"):
        decl = decl.child("declarator")
    if decl is not None and decl.node_type == "identifier":
        excluded.add(id(decl))
    out = []
    for i, term in enumerate(root.terminals()):
        if term.node_type == "identifier" and id(term) not in excluded:
            out.append((i, term))
    return out


def assemble_input(unit: SourceUnit, ast: Ast) -> ModelInput:
    tokens = ast.tokens
    var_occ = {i: term.value for i, term in variable_terminals(ast.root)}
    return ModelInput(
        code_tokens=[t.text for t in tokens],
        ast_tokens=linearize(ast),
        var_occurrences=var_occ,
        token_lines=[t.line for t in tokens],
        token_kinds=[t.kind for t in tokens],
    )


def unit_from_record(record: dict) -> SourceUnit:
    return SourceUnit(
        project_id=str(record["project"]),
        path=str(record["path"]),
        function_name=str(record["name"]),
        text=record["code"],
    )


def read_corpus(path: str | Path, rejects: str | Path | None = None) -> Iterator[tuple[int, SourceUnit]]:
    """Yield ``(index, unit)`` for every well-formed JSONL record.

    Malformed records are skipped; when ``rejects`` is given each one is
    appended there as ``{"index", "reason"}``.
    """
    sink = open(rejects, "w", encoding="utf-8") if rejects else None
    try:
        with open(path, encoding="utf-8") as fh:
            for index, line in enumerate(fh):
                if not line.strip():
                    continue
                try:
                    unit = unit_from_record(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    reason = f"malformed record: {exc}"
                    log.info("record %d rejected: %s", index, reason)
                    if sink:
                        sink.write(json.dumps({"index": index, "reason": reason}) + "\n")
                    continue
                yield index, unit
    finally:
        if sink:
            sink.close()


def write_corpus(units: Iterable[SourceUnit], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u in units:
            fh.write(json.dumps({"project": u.project_id, "path": u.path,
                                 "name": u.function_name, "code": u.text}) + "\n")


def try_parse(unit: SourceUnit) -> tuple[Ast | None, str | None]:
    try:
        return parse(unit), None
    except ParseError as exc:
        return None, str(exc)
