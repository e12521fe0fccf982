"""Concrete edit extraction, anti-unification and pattern mining by clustering."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from itertools import combinations

from ..syntax import LITERAL_TYPES, STATEMENT_TYPES, Ast, AstNode
from . import template as tpl
from .store import EditPattern

log = logging.getLogger(__name__)

_BLOCKS = ("compound_statement", "case_statement")
CONCRETE_TERMINALS = frozenset({"identifier", "field_identifier", "type_identifier"}) | LITERAL_TYPES


class Identical(ValueError):
    """The two trees are structurally equal, so there is no edit."""


class NotGeneralizable(ValueError):
    """No pattern covers all the given edits."""


@dataclass(frozen=True)
class ConcreteEdit:
    before: AstNode
    after: AstNode | None  # None: the statement was deleted
    sample_id: str | None = None
    vuln_type: str | None = None


def extract_edit(before: Ast | AstNode, after: Ast | AstNode) -> tuple[AstNode, AstNode | None]:
    """Smallest statement-level pair of subtrees covering every difference."""
    a = before.root if isinstance(before, Ast) else before
    b = after.root if isinstance(after, Ast) else after
    if a == b:
        raise Identical("trees are equal")
    path: list[tuple[AstNode, AstNode]] = []
    while True:
        path.append((a, b))
        if a.node_type == b.node_type and not a.is_terminal and not b.is_terminal:
            if len(a.children) == len(b.children):
                diff = [k for k, (x, y) in enumerate(zip(a.children, b.children)) if x != y]
                if len(diff) == 1:
                    a, b = a.children[diff[0]], b.children[diff[0]]
                    continue
            elif a.node_type in _BLOCKS:
                removed = _single_removal(a.children, b.children)
                if removed is not None:
                    return removed, None
        return _lift(path)


def _single_removal(xs: tuple, ys: tuple) -> AstNode | None:
    if len(xs) != len(ys) + 1:
        return None
    p = 0
    while p < len(ys) and xs[p] == ys[p]:
        p += 1
    if xs[p + 1:] == ys[p:] and xs[p].node_type in STATEMENT_TYPES:
        return xs[p]
    return None


def _lift(path: list[tuple[AstNode, AstNode]]) -> tuple[AstNode, AstNode]:
    for a, b in reversed(path):
        if a.node_type in STATEMENT_TYPES and b.node_type in STATEMENT_TYPES:
            return a, b
    return path[0]


# -- least general generalization ------------------------------------------------

class _Fail(Exception):
    pass


class _Generalizer:
    def __init__(self):
        self.holes: dict[tuple[AstNode, ...], str] = {}
        self.closed = False  # once the rhs is being built no new holes may appear

    def hole_for(self, nodes: tuple[AstNode, ...]) -> AstNode:
        if any(n.node_type in STATEMENT_TYPES for n in nodes):
            raise _Fail("statement-level mismatch")
        if any(n.node_type in ("punctuation", "keyword") for n in nodes):
            raise _Fail("token mismatch")
        key = tuple(tpl.from_concrete(n) for n in nodes)
        name = self.holes.get(key)
        if name is None:
            if self.closed:
                raise _Fail("rhs difference not bound by lhs")
            name = f"h{len(self.holes)}"
            self.holes[key] = name
        return tpl.hole(name)

    def gen(self, nodes: tuple[AstNode, ...]) -> AstNode:
        first = nodes[0]
        if all(n == first for n in nodes[1:]):
            return tpl.from_concrete(first)
        same_shape = all(n.node_type == first.node_type and len(n.children) == len(first.children)
                         and not n.is_terminal for n in nodes)
        if same_shape:
            try:
                kids = tuple(self.gen(tuple(n.children[k] for n in nodes))
                             for k in range(len(first.children)))
                return AstNode(first.node_type, kids)
            except _Fail:
                if first.node_type in STATEMENT_TYPES:
                    raise
        return self.hole_for(nodes)


def _generalize(edits: list[ConcreteEdit]) -> tuple[AstNode, AstNode | None]:
    g = _Generalizer()
    lhs = g.gen(tuple(e.before for e in edits))
    afters = [e.after for e in edits]
    if all(a is None for a in afters):
        rhs = None
    elif any(a is None for a in afters):
        raise _Fail("deletions mixed with replacements")
    else:
        g.closed = True
        rhs = g.gen(tuple(afters))
    return tpl.canonical_holes(lhs, rhs)


def anti_unify(edits: list[ConcreteEdit], pattern_id: str = "au", vuln_type: str | None = None) -> EditPattern:
    """Least general pattern whose lhs/rhs instantiate to every edit."""
    if not edits:
        raise ValueError("anti_unify needs at least one edit")
    try:
        lhs, rhs = _generalize(list(edits))
    except _Fail as exc:
        raise NotGeneralizable(str(exc)) from None
    if vuln_type is None:
        vuln_type = majority_label(edits)
    return EditPattern(pattern_id, lhs, rhs, vuln_type,
                       {"kind": "mined", "support": len(edits)})


def majority_label(edits: list[ConcreteEdit]) -> str:
    counts = Counter(e.vuln_type or "unknown" for e in edits)
    best = max(counts.values())
    return min(label for label, c in counts.items() if c == best)


def hole_count(p: EditPattern) -> int:
    return len(tpl.holes_in(p.lhs))


def has_concrete_terminal(p: EditPattern) -> bool:
    return any(n.node_type in CONCRETE_TERMINALS or n.node_type == tpl.GLOB for n in p.lhs.walk())


def mine_patterns(edits: list[ConcreteEdit]) -> list[EditPattern]:
    """Greedy agglomerative clustering; one pattern per cluster node.

    At each step the pair of clusters whose joint generalization has the fewest
    holes is merged, provided that generalization keeps a concrete identifier or
    literal.  Leaves are emitted too, so every edit is covered by at least one
    pattern.  Structural duplicates keep the first id.
    """
    clusters: list[tuple[int, ...]] = [(i,) for i in range(len(edits))]
    nodes: list[tuple[int, ...]] = list(clusters)
    cache: dict[tuple[int, ...], EditPattern | None] = {}

    def generalize(members: tuple[int, ...]) -> EditPattern | None:
        if members not in cache:
            try:
                p = anti_unify([edits[i] for i in members])
                cache[members] = p if (len(members) == 1 or has_concrete_terminal(p)) else None
            except NotGeneralizable:
                cache[members] = None
        return cache[members]

    while True:
        best = None
        for x, y in combinations(clusters, 2):
            members = tuple(sorted(x + y))
            p = generalize(members)
            if p is None:
                continue
            cand = (hole_count(p), members)
            if best is None or cand < best[0]:
                best = (cand, x, y)
        if best is None:
            break
        (_, merged), x, y = best
        clusters = [c for c in clusters if c not in (x, y)] + [merged]
        nodes.append(merged)
    out: list[EditPattern] = []
    seen: set = set()
    for members in nodes:
        p = generalize(members)
        if p is None or p.key in seen:
            continue
        seen.add(p.key)
        p.id = f"m{len(out) + 1:04d}"
        p.provenance = {"kind": "mined", "support": len(members),
                        "samples": [edits[i].sample_id for i in members if edits[i].sample_id is not None]}
        out.append(p)
    log.info("mined %d patterns from %d edits", len(out), len(edits))
    return out
