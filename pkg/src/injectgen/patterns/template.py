"""AST templates with holes and name globs.

A template is an ordinary :class:`AstNode` tree in which some positions are
``$hole`` nodes (value ``h0``, ``h1``, ...) or ``$glob`` nodes (value such as
``*free*``).  Templates are written in C-like text (``*free*(h0);``) or as
s-expressions in pattern files.
"""
from __future__ import annotations

import re

from ..syntax import BINARY_PRECEDENCE, AstNode, parse_statement, to_sexpr

HOLE = "$hole"
GLOB = "$glob"
EMPTY = "EMPTY"

_HOLE_NAME = re.compile(r"^h\d+$")
_GLOB_TEXT = re.compile(r"(?<![\w)\]])\*(\w+)\*(?!\w)")
_NAME_TYPES = ("identifier", "type_identifier", "field_identifier")


def hole(name: str) -> AstNode:
    return AstNode(HOLE, (), name)


def is_hole(node: AstNode) -> bool:
    return node.node_type == HOLE


def _strip(node: AstNode) -> AstNode:
    """Drop spans so templates compare and serialize independently of source."""
    if node.is_terminal:
        return AstNode(node.node_type, (), node.value, role=node.role)
    return AstNode(node.node_type, tuple(_strip(c) for c in node.children), None, role=node.role)


def parse_template(text: str) -> AstNode | None:
    """Parse C-like template text; ``EMPTY`` yields ``None``."""
    text = text.strip()
    if text == EMPTY:
        return None
    globs: list[str] = []

    def stash(m: re.Match) -> str:
        globs.append(m.group(0))
        return f"__glob{len(globs) - 1}__"

    stmt = parse_statement(_GLOB_TEXT.sub(stash, text))

    def convert(node: AstNode) -> AstNode:
        if node.is_terminal:
            if node.node_type in _NAME_TYPES and node.value:
                if _HOLE_NAME.match(node.value):
                    return AstNode(HOLE, (), node.value, role=node.role)
                m = re.fullmatch(r"__glob(\d+)__", node.value)
                if m:
                    return AstNode(GLOB, (), globs[int(m.group(1))], role=node.role)
            return AstNode(node.node_type, (), node.value, role=node.role)
        return AstNode(node.node_type, tuple(convert(c) for c in node.children), None, role=node.role)

    return convert(stmt)


def from_concrete(node: AstNode) -> AstNode:
    return _strip(node)


def holes_in(node: AstNode | None) -> list[str]:
    """Hole names in first-appearance (pre-order) order."""
    if node is None:
        return []
    seen: dict[str, None] = {}
    for n in node.walk():
        if n.node_type == HOLE:
            seen.setdefault(n.value, None)
    return list(seen)


def rename_holes(node: AstNode | None, mapping: dict[str, str]) -> AstNode | None:
    if node is None:
        return None
    if node.node_type == HOLE:
        return AstNode(HOLE, (), mapping.get(node.value, node.value), role=node.role)
    if node.is_terminal:
        return node
    return AstNode(node.node_type, tuple(rename_holes(c, mapping) for c in node.children), None, role=node.role)


def canonical_holes(lhs: AstNode, rhs: AstNode | None) -> tuple[AstNode, AstNode | None]:
    """Renumber holes h0, h1, ... by first appearance in lhs then rhs."""
    order = holes_in(lhs) + [h for h in holes_in(rhs) if h not in holes_in(lhs)]
    mapping = {old: f"h{i}" for i, old in enumerate(order)}
    # two-phase rename avoids collisions between old and new names
    tmp = {old: f"__t{i}" for i, old in enumerate(order)}
    back = {f"__t{i}": mapping[old] for i, old in enumerate(order)}
    return (rename_holes(rename_holes(lhs, tmp), back),
            rename_holes(rename_holes(rhs, tmp), back))


# -- s-expressions ---------------------------------------------------------

def dumps(node: AstNode | None) -> str:
    return EMPTY if node is None else to_sexpr(node)


_SEXPR_TOKEN = re.compile(r'\s*(?:(\()|(\))|"((?:\\.|[^"\\])*)"|([^\s()"]+))')


def loads(text: str) -> AstNode | None:
    text = text.strip()
    if text == EMPTY:
        return None
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _SEXPR_TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"bad s-expression near {text[pos:pos + 20]!r}")
        pos = m.end()
        if m.group(1):
            tokens.append(("(", "("))
        elif m.group(2):
            tokens.append((")", ")"))
        elif m.group(3) is not None:
            tokens.append(("str", re.sub(r"\\(.)", r"\1", m.group(3))))
        else:
            tokens.append(("sym", m.group(4)))
    i = 0

    def parse_node() -> AstNode:
        nonlocal i
        if tokens[i][0] != "(":
            raise ValueError("expected '('")
        node_type = tokens[i + 1][1]
        i += 2
        if tokens[i][0] == "str":
            value = tokens[i][1]
            i += 1
            if tokens[i][0] != ")":
                raise ValueError("expected ')' after terminal value")
            i += 1
            return AstNode(node_type, (), value)
        children = []
        while tokens[i][0] != ")":
            children.append(parse_node())
        i += 1
        return AstNode(node_type, tuple(children))

    node = parse_node()
    if i != len(tokens):
        raise ValueError("trailing tokens in s-expression")
    return node


# -- rendering -------------------------------------------------------------

_OPERATOR_PARENTS = {"binary_expression", "unary_expression", "pointer_expression", "cast_expression",
                     "update_expression"}
_POSTFIX_PARENTS = {"subscript_expression", "field_expression", "call_expression"}
_LOOSE = {"assignment_expression", "conditional_expression", "comma_expression"}


def _precedence(node: AstNode) -> int:
    if node.node_type == "binary_expression":
        return BINARY_PRECEDENCE[node.children[1].value]
    if node.node_type in _LOOSE:
        return 0
    if node.node_type == "cast_expression":
        return 11
    if node.node_type in ("unary_expression", "pointer_expression", "sizeof_expression"):
        return 11
    return 100


def _needs_parens(bound: AstNode, parent: AstNode, position: int) -> bool:
    child_prec = _precedence(bound)
    if child_prec == 100:
        return False
    if parent.node_type == "binary_expression":
        parent_prec = BINARY_PRECEDENCE[parent.children[1].value]
        return child_prec < parent_prec or (position == 2 and child_prec == parent_prec)
    if parent.node_type in _OPERATOR_PARENTS:
        return child_prec < 11
    if parent.node_type in _POSTFIX_PARENTS and position == 0:
        return True
    if parent.node_type == "argument_list" or parent.node_type == "initializer_list":
        return bound.node_type == "comma_expression"
    return False


_NO_SPACE_BEFORE = {";", ",", ")", "]", "[", ".", "->", "++", "--", ":"}
_NO_SPACE_AFTER = {"(", "[", ".", "->"}
_NAME_KINDS = {"identifier", "type_identifier", "field_identifier", "$hole", "$glob"}


def render(node: AstNode | None, bindings: dict[str, AstNode] | None = None,
           witnesses: dict[str, str] | None = None) -> str:
    """Render a (template) tree to C text, substituting bound holes and globs."""
    if node is None:
        return ""
    return _join(_render_tokens(node, bindings or {}, witnesses or {}, None, 0))


def _render_tokens(node: AstNode, bindings, witnesses, parent: AstNode | None,
                   position: int) -> list[tuple[str, str]]:
    if node.node_type == HOLE:
        bound = bindings.get(node.value)
        if bound is None:
            return [(node.value, "identifier")]
        inner = _render_tokens(bound, {}, {}, None, 0)
        if bound.node_type == "argument_list" and parent is not None and parent.node_type == "argument_list":
            return inner[1:-1]
        if parent is not None and _needs_parens(bound, parent, position):
            return [("(", "punctuation"), *inner, (")", "punctuation")]
        return inner
    if node.node_type == GLOB:
        return [(witnesses.get(node.value, node.value), "identifier")]
    if node.is_terminal:
        return [(node.value or "", node.node_type)]
    out: list[tuple[str, str]] = []
    for k, child in enumerate(node.children):
        toks = _render_tokens(child, bindings, witnesses, node, k)
        if child.node_type == "punctuation":
            if node.node_type in ("unary_expression", "pointer_expression", "pointer_declarator") or (
                    node.node_type == "update_expression" and k == 0):
                toks = [(t, "prefix") for t, _ in toks]
            elif node.node_type == "update_expression":
                toks = [(t, "postfix") for t, _ in toks]
        out.extend(toks)
    return out


def _join(tokens: list[tuple[str, str]]) -> str:
    out: list[str] = []
    prev: tuple[str, str] | None = None
    for text, kind in tokens:
        if prev is not None:
            ptext, pkind = prev
            if text in ("{", "}") or ptext in ("{", "}"):
                space = True
            elif kind == "postfix" or pkind == "prefix":
                space = False
            elif kind == "punctuation" and text in _NO_SPACE_BEFORE:
                space = False
            elif kind == "punctuation" and text == "(":
                space = not (pkind in _NAME_KINDS or ptext in (")", "]", "(", "sizeof"))
            elif pkind == "punctuation" and ptext in _NO_SPACE_AFTER:
                space = False
            else:
                space = True
            if space:
                out.append(" ")
        out.append(text)
        prev = (text, kind)
    return "".join(out)
