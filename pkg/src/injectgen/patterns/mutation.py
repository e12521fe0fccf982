"""Rewrite rules over patterns that vary or generalize them.

Rule parameters (alternative error codes, exit statements) are data; the
shapes each rule recognizes are implemented here and selected by rule id.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator

from ..syntax import AstNode
from . import template as tpl
from .store import EditPattern

log = logging.getLogger(__name__)

Mutant = tuple[AstNode, "AstNode | None"]


@dataclass(frozen=True)
class MutationRule:
    id: str
    direction: str  # "bidirectional" | "unidirectional"
    alternatives: tuple[str, ...] = ()
    description: str = ""
    params: dict = field(default_factory=dict, compare=False, hash=False)

    @classmethod
    def from_json(cls, d: dict) -> "MutationRule":
        if d["direction"] not in ("bidirectional", "unidirectional"):
            raise ValueError(f"rule {d['id']}: bad direction {d['direction']!r}")
        if d["id"] not in _SHAPES:
            raise ValueError(f"unknown mutation rule {d['id']!r}")
        return cls(d["id"], d["direction"], tuple(d.get("alternatives", ())),
                   d.get("description", ""), d.get("params", {}))


# -- shape helpers -------------------------------------------------------------

def _sole(node: AstNode) -> AstNode | None:
    if node.node_type == "compound_statement" and len(node.children) == 3:
        return node.children[1]
    return None


def _exit_of(stmt: AstNode) -> tuple[AstNode, bool] | None:
    """The exit statement of a safety-check if (no else, single-statement body)."""
    if stmt.node_type != "if_statement" or len(stmt.children) != 5:
        return None
    body = stmt.children[4]
    inner = _sole(body)
    braced = inner is not None
    target = inner if braced else body
    if target.node_type in ("return_statement", "break_statement", "continue_statement"):
        return target, braced
    return None


def _with_exit(stmt: AstNode, new_exit: AstNode) -> AstNode:
    body = stmt.children[4]
    if _sole(body) is not None:
        body = AstNode(body.node_type, (body.children[0], new_exit, body.children[2]))
    else:
        body = new_exit
    return AstNode(stmt.node_type, (*stmt.children[:4], body))


def _return_text(value: str) -> str:
    return f"return {value};" if value else "return;"


def _return_value(ret: AstNode) -> str | None:
    """Source text of a concrete return value ('' for a bare return), None if it has holes."""
    if len(ret.children) == 2:
        return ""
    value = ret.children[1]
    if any(n.node_type in (tpl.HOLE, tpl.GLOB) for n in value.walk()):
        return None
    return tpl.render(value)


# -- rules ---------------------------------------------------------------------

def _call_assign(rule: MutationRule, lhs: AstNode, rhs: AstNode | None) -> Iterator[Mutant]:
    def call_stmt(n: AstNode | None) -> AstNode | None:
        if n is not None and n.node_type == "expression_statement" \
                and n.children[0].node_type == "call_expression":
            return n.children[0]
        return None

    def assigned_call(n: AstNode | None) -> tuple[AstNode, AstNode] | None:
        if n is None or n.node_type != "expression_statement":
            return None
        e = n.children[0]
        if e.node_type == "assignment_expression" and e.children[1].value == "=" \
                and e.children[0].node_type == tpl.HOLE and e.children[2].node_type == "call_expression":
            return e.children[0], e.children[2]
        return None

    def assign(target: AstNode, call: AstNode) -> AstNode:
        expr = AstNode("assignment_expression", (target, AstNode("punctuation", (), "="), call))
        return AstNode("expression_statement", (expr, AstNode("punctuation", (), ";")))

    call = call_stmt(lhs)
    if call is not None and (rhs is None or call_stmt(rhs) is not None):
        # canonicalization renumbers this to h0 afterwards
        fresh = tpl.hole("h_assigned")
        yield assign(fresh, call), None if rhs is None else assign(fresh, call_stmt(rhs))
    pair = assigned_call(lhs)
    if pair is not None:
        target, call = pair
        if rhs is None:
            if target.value not in tpl.holes_in(call):
                yield AstNode("expression_statement", (call, AstNode("punctuation", (), ";"))), None
        else:
            rpair = assigned_call(rhs)
            if rpair is not None and rpair[0] == target and target.value not in tpl.holes_in(call) \
                    and target.value not in tpl.holes_in(rpair[1]):
                semi = AstNode("punctuation", (), ";")
                yield AstNode("expression_statement", (call, semi)), AstNode("expression_statement", (rpair[1], semi))


def _error_code(rule: MutationRule, lhs: AstNode, rhs: AstNode | None) -> Iterator[Mutant]:
    if rhs is not None:
        return
    found = _exit_of(lhs)
    if found is None or found[0].node_type != "return_statement":
        return
    current = _return_value(found[0])
    if current is None or current not in rule.alternatives:
        return
    for alt in rule.alternatives:
        if alt != current:
            yield _with_exit(lhs, tpl.parse_template(_return_text(alt))), None


def _condition_hole(rule: MutationRule, lhs: AstNode, rhs: AstNode | None) -> Iterator[Mutant]:
    if rhs is not None or _exit_of(lhs) is None:
        return
    if lhs.children[2].node_type == tpl.HOLE:
        return
    cond = tpl.hole("h_condition")
    kids = list(lhs.children)
    kids[2] = cond
    yield AstNode(lhs.node_type, tuple(kids)), None


def _exit_statement(rule: MutationRule, lhs: AstNode, rhs: AstNode | None) -> Iterator[Mutant]:
    if rhs is not None:
        return
    found = _exit_of(lhs)
    if found is None:
        return
    kind = found[0].node_type
    returns = rule.params.get("return_values", [""])
    for alt in rule.alternatives:
        if alt == "return":
            if kind != "return_statement":
                for value in returns:
                    yield _with_exit(lhs, tpl.parse_template(_return_text(value))), None
        elif f"{alt}_statement" != kind:
            yield _with_exit(lhs, tpl.parse_template(f"{alt};")), None


_SHAPES: dict[str, Callable[..., Iterator[Mutant]]] = {
    "call_assign": _call_assign,
    "error_code": _error_code,
    "condition_hole": _condition_hole,
    "exit_statement": _exit_statement,
}


def apply_rule(rule: MutationRule, p: EditPattern) -> list[Mutant]:
    out = []
    for lhs, rhs in _SHAPES[rule.id](rule, p.lhs, p.rhs):
        out.append(tpl.canonical_holes(lhs, rhs))
    return out


def mutant_id(lhs: AstNode, rhs: AstNode | None) -> str:
    digest = hashlib.sha1(f"{tpl.dumps(lhs)}\n{tpl.dumps(rhs)}".encode()).hexdigest()
    return f"mut-{digest[:10]}"


def mutate(patterns: list[EditPattern], rules: list[MutationRule]) -> list[EditPattern]:
    """Close ``patterns`` under ``rules``: input order first, then mutants as discovered.

    Mutants that are structurally equal to an existing pattern are dropped, so
    running ``mutate`` again on its own output adds nothing.
    """
    out = list(patterns)
    seen = {p.key for p in out}
    queue = list(out)
    while queue:
        p = queue.pop(0)
        for rule in rules:
            for lhs, rhs in apply_rule(rule, p):
                m = EditPattern(mutant_id(lhs, rhs), lhs, rhs, p.vuln_type,
                                {"kind": "mutated", "from": p.id, "rule": rule.id})
                if m.key in seen:
                    continue
                seen.add(m.key)
                out.append(m)
                queue.append(m)
    log.info("mutation added %d patterns to %d", len(out) - len(patterns), len(patterns))
    return out
