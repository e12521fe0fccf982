"""Brute-force reference implementations used to check the pattern engine.

Matching is decided by trying every assignment of template holes (and globs)
to subtrees of the subject, substituting, and comparing trees for equality.
Single-statement braces are normalized away on both sides first, and a sole
hole in an argument list may stand for the whole list.  Declaration-tail
templates (``unsigned h0;``) are not modelled; corpora checked with these
oracles contain no declarations those templates could match.
"""
from __future__ import annotations

import itertools
from fnmatch import fnmatchcase
from fractions import Fraction

from injectgen.lexer import token_texts
from injectgen.patterns import template as tpl
from injectgen.syntax import STATEMENT_TYPES, AstNode

UNBINDABLE = {"punctuation", "keyword"}
NAMES = {"identifier", "type_identifier", "field_identifier"}


def unbrace(node: AstNode) -> AstNode:
    kids = tuple(unbrace(c) for c in node.children)
    if node.node_type == "compound_statement" and len(kids) == 3 and kids[1].node_type in STATEMENT_TYPES:
        return kids[1]
    return AstNode(node.node_type, kids, node.value) if kids else node


def walk(node: AstNode):
    yield node
    for c in node.children:
        yield from walk(c)


def statements(root: AstNode) -> list[AstNode]:
    body = next(c for c in root.children if c.node_type == "compound_statement")
    return [n for n in walk(root) if n.node_type in STATEMENT_TYPES and n is not body]


def _holes_and_globs(t: AstNode):
    holes, globs = [], []
    for n in walk(t):
        if n.node_type == tpl.HOLE and n.value not in holes:
            holes.append(n.value)
        elif n.node_type == tpl.GLOB and n.value not in globs:
            globs.append(n.value)
    return holes, globs


def substitute(t: AstNode, env: dict, genv: dict) -> AstNode:
    if t.node_type == tpl.HOLE:
        return env[t.value]
    if t.node_type == tpl.GLOB:
        return genv[t.value]
    if t.node_type == "argument_list" and len(t.children) == 3 and t.children[1].node_type == tpl.HOLE \
            and env[t.children[1].value].node_type == "argument_list":
        return env[t.children[1].value]
    if t.is_terminal:
        return AstNode(t.node_type, (), t.value)
    return AstNode(t.node_type, tuple(substitute(c, env, genv) for c in t.children))


def bindings(template: AstNode, subject: AstNode) -> list[tuple[dict, dict]]:
    """Every (hole env, glob env) whose substitution reproduces ``subject``.

    Exact structure is tried first; brace-normalized structure only if that fails,
    so bound subtrees keep their braces whenever possible.
    """
    return _bindings(template, subject) or _bindings(unbrace(template), unbrace(subject))


def _bindings(t: AstNode, s: AstNode) -> list[tuple[dict, dict]]:
    if t.node_type not in (tpl.HOLE, s.node_type):
        return []
    holes, globs = _holes_and_globs(t)
    nodes = list(walk(s))
    cand = [n for n in nodes if n.node_type not in UNBINDABLE]
    out = []
    for gchoice in itertools.product(*[[n for n in nodes if n.node_type in NAMES
                                        and fnmatchcase(n.value or "", g)] for g in globs]):
        genv = dict(zip(globs, gchoice))
        for hchoice in itertools.product(cand, repeat=len(holes)):
            env = dict(zip(holes, hchoice))
            if substitute(t, env, genv) == s:
                out.append((env, genv))
    return out


def matching_statements(template: AstNode, root: AstNode) -> list[AstNode]:
    return [s for s in statements(root) if bindings(template, s)]


def _tokens_of(node: AstNode) -> list[str]:
    return [n.value for n in walk(node) if n.is_terminal]


def _parent_of(root: AstNode, target: AstNode) -> AstNode | None:
    for n in walk(root):
        if any(c is target for c in n.children):
            return n
    return None


def rewrite_tokens(pattern, root: AstNode, text: str, stmt: AstNode, env: dict, genv: dict) -> list[str]:
    """Token sequence after rewriting ``stmt``, built purely at the token level."""
    before = token_texts(text[:stmt.span[0]])
    after = token_texts(text[stmt.span[1]:])
    if pattern.rhs is None:
        parent = _parent_of(root, stmt)
        middle = [] if parent is not None and parent.node_type in ("compound_statement", "case_statement") \
            else [";"]
    else:
        middle = []
        for term in walk(pattern.rhs):
            if not term.is_terminal:
                continue
            if term.node_type == tpl.HOLE:
                middle += _tokens_of(env[term.value])
            elif term.node_type == tpl.GLOB:
                middle.append(genv[term.value].value)
            else:
                middle.append(term.value)
    return before + middle + after


def scores(pattern, samples) -> tuple[int, Fraction, int]:
    """(s_preval, s_spec, s_ident) by exhaustive enumeration."""
    preval = 0
    counts = []
    for sample in samples:
        root, text = sample.normal_ast.root, sample.normal
        hits = matching_statements(pattern.lhs, root)
        if hits:
            counts.append(len(hits))
        lo, hi = sample.location()
        ok = False
        for stmt in statements(root):
            if not lo <= stmt.line <= hi:
                continue
            for env, genv in bindings(pattern.lhs, stmt):
                if rewrite_tokens(pattern, root, text, stmt, env, genv) == token_texts(sample.vulnerable):
                    ok = True
        preval += ok
    spec = Fraction(len(counts), sum(counts)) if counts else Fraction(0)
    ident = sum(1 for n in walk(pattern.lhs) if n.node_type in NAMES or n.node_type == tpl.GLOB)
    return preval, spec, ident
