"""Choosing the statement to inject into.

The rule-based locator needs no trained model: it scores each statement by
pattern matches, safety-check shape and calls to the catalog's function
families, and returns the best one (earliest on ties).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fnmatch import fnmatchcase
from functools import lru_cache

from .code_model import SourceUnit
from .lexer import token_texts
from .patterns import template as tpl
from .patterns.catalog import load_manual_catalog, shipped_patterns
from .patterns.match import unify
from .patterns.store import EditPattern
from .syntax import Ast, AstNode, parse_function

_ERROR_VALUE = re.compile(r"^(NULL|0|-\s*\d+|-\s*[A-Za-z_]\w*|E[A-Z]+)$")


class NoStatement(ValueError):
    pass


@dataclass
class ContextPrediction:
    statement_text: list[str]
    resolved_span: tuple[int, int] | None  # (statement index, 1-based line)
    confidence: float
    statement: AstNode | None = None
    ast: Ast | None = None

    @property
    def resolved(self) -> bool:
        return self.resolved_span is not None


def statement_tokens(ast: Ast, stmt: AstNode) -> list[str]:
    return token_texts(ast.source(stmt))


def resolve(ast: Ast, tokens: list[str]) -> tuple[int, AstNode] | None:
    """First statement whose token sequence equals ``tokens``."""
    for k, stmt in enumerate(ast.statements()):
        if statement_tokens(ast, stmt) == tokens:
            return k, stmt
    return None


def is_error_return(stmt: AstNode) -> bool:
    if stmt.node_type != "return_statement":
        return False
    if len(stmt.children) == 2:
        return True
    return bool(_ERROR_VALUE.match(tpl.render(stmt.children[1])))


def is_safety_check(stmt: AstNode) -> bool:
    """``if (c) return E;`` with no else and a single-statement body."""
    if stmt.node_type != "if_statement" or stmt.child("alternative") is not None:
        return False
    body = stmt.child("consequence")
    if body.node_type == "compound_statement":
        if len(body.children) != 3:
            return False
        body = body.children[1]
    return is_error_return(body)


@lru_cache(maxsize=1)
def family_globs() -> tuple[str, ...]:
    """Callee globs and names appearing in the manual catalog's left-hand sides."""
    out: list[str] = []
    for p in load_manual_catalog():
        for node in p.lhs.walk():
            if node.node_type == "call_expression":
                callee = node.children[0]
                if callee.node_type in (tpl.GLOB, "identifier") and callee.value not in out:
                    out.append(callee.value)
    return tuple(out)


def calls_family(stmt: AstNode) -> bool:
    globs = family_globs()
    for node in stmt.walk():
        if node.node_type == "call_expression" and node.children[0].node_type == "identifier":
            name = node.children[0].value
            if any(fnmatchcase(name, g) for g in globs):
                return True
    return False


def statement_score(stmt: AstNode, patterns: list[EditPattern]) -> int:
    score = 0
    if any(unify(p.lhs, stmt) is not None for p in patterns):
        score += 2
    if any(is_safety_check(n) for n in stmt.walk()):
        score += 1
    if calls_family(stmt):
        score += 1
    return score


@lru_cache(maxsize=1)
def default_rule_patterns() -> tuple[EditPattern, ...]:
    return tuple(shipped_patterns(mutated=False))


def rule_based_locate(unit: SourceUnit | str | Ast, patterns: list[EditPattern] | None = None) -> ContextPrediction:
    """Highest-scoring statement; the earliest wins ties."""
    if isinstance(unit, Ast):
        ast = unit
    else:
        ast = parse_function(unit.text if isinstance(unit, SourceUnit) else unit)
    pats = list(default_rule_patterns() if patterns is None else patterns)
    stmts = ast.statements()
    if not stmts:
        raise NoStatement("function body has no statements")
    best_k, best = 0, -1
    for k, stmt in enumerate(stmts):
        s = statement_score(stmt, pats)
        if s > best:
            best_k, best = k, s
    stmt = stmts[best_k]
    return ContextPrediction(statement_tokens(ast, stmt), (best_k, stmt.line), float(best), stmt, ast)
