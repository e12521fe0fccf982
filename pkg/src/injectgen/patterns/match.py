"""Matching edit-pattern templates against function ASTs and applying them.

Unification is syntactic with three relaxations that the shipped catalog needs:

* a braced single statement in the template also matches the bare statement
  (and vice versa), so ``if (c) { return -1; }`` matches ``if (c) return -1;``;
* a call whose template argument list is a lone hole (``*free*(h0)``) matches
  any arity: with zero or several arguments the hole binds the whole list;
* a declaration template ``T h0;`` whose type ``T`` is a strict prefix of the
  subject's type binds ``h0`` to the rest of the declaration, so
  ``unsigned h0;`` matches ``unsigned int n;`` with ``h0 = int n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fnmatch import fnmatchcase

from ..lexer import token_texts
from ..syntax import STATEMENT_TYPES, Ast, AstNode, ParseError, parse_function
from . import template as tpl
from .store import EditPattern, UnboundHole

_NAME_TYPES = frozenset({"identifier", "type_identifier", "field_identifier"})
_UNBINDABLE = frozenset({"punctuation", "keyword"})
_SIGNEDNESS = frozenset({"unsigned", "signed"})
DECLARATION_TAIL = "declaration_tail"


class ApplyError(ValueError):
    """The rewritten function no longer parses."""


@dataclass
class MatchBinding:
    site: AstNode
    bindings: dict[str, AstNode] = field(default_factory=dict)
    glob_witnesses: dict[str, str] = field(default_factory=dict)

    @property
    def span(self) -> tuple[int, int]:
        return self.site.span


@dataclass(frozen=True)
class Edit:
    """A text edit turning the normal function into the vulnerable one."""
    start: int
    old_text: str
    new_text: str
    normal_lines: tuple[int, int]
    lines: tuple[int, int]

    def revert(self, vulnerable: str) -> str:
        return vulnerable[:self.start] + self.old_text + vulnerable[self.start + len(self.new_text):]

    def to_json(self) -> dict:
        return {"start": self.start, "old": self.old_text, "new": self.new_text}


@dataclass
class Applied:
    ast: Ast
    edit: Edit

    @property
    def lines(self) -> tuple[int, int]:
        return self.edit.lines


# -- unification ---------------------------------------------------------------

class _State:
    __slots__ = ("bindings", "witnesses")

    def __init__(self, bindings=None, witnesses=None):
        self.bindings: dict[str, AstNode] = dict(bindings or {})
        self.witnesses: dict[str, str] = dict(witnesses or {})

    def bind(self, name: str, node: AstNode) -> bool:
        bound = self.bindings.get(name)
        if bound is None:
            self.bindings[name] = node
            return True
        return bound == node

    def witness(self, glob: str, lexeme: str) -> bool:
        seen = self.witnesses.setdefault(glob, lexeme)
        return seen == lexeme


def _sole_statement(node: AstNode) -> AstNode | None:
    if node.node_type == "compound_statement" and len(node.children) == 3:
        return node.children[1]
    return None


def _unify(t: AstNode, s: AstNode, st: _State) -> bool:
    tt = t.node_type
    if tt == tpl.HOLE:
        return s.node_type not in _UNBINDABLE and st.bind(t.value, s)
    if tt == tpl.GLOB:
        return s.node_type in _NAME_TYPES and fnmatchcase(s.value or "", t.value) and st.witness(t.value, s.value)
    if tt != s.node_type:
        if tt in STATEMENT_TYPES and s.node_type in STATEMENT_TYPES:
            inner = _sole_statement(t)
            if inner is not None:
                return _unify(inner, s, st)
            inner = _sole_statement(s)
            if inner is not None:
                return _unify(t, inner, st)
        return False
    if t.is_terminal or s.is_terminal:
        return t.is_terminal and s.is_terminal and t.value == s.value
    if tt == "argument_list" and len(t.children) == 3 and t.children[1].node_type == tpl.HOLE \
            and len(s.children) != 3:
        return st.bind(t.children[1].value, s)
    if tt == "declaration" and _declaration_tail_shape(t):
        return _unify_declaration_tail(t, s, st)
    if len(t.children) != len(s.children):
        return False
    return all(_unify(tc, sc, st) for tc, sc in zip(t.children, s.children))


def _declaration_tail_shape(t: AstNode) -> bool:
    return len(t.children) == 3 and t.children[1].node_type == tpl.HOLE


def _unify_declaration_tail(t: AstNode, s: AstNode, st: _State) -> bool:
    ttype, thole = t.children[0], t.children[1]
    stype = s.children[0]
    n = len(ttype.children)
    if len(stype.children) < n:
        return False
    if not all(_unify(a, b, st) for a, b in zip(ttype.children, stype.children[:n])):
        return False
    rest_type = stype.children[n:]
    declarators = [c for c in s.children[1:-1]]
    if not rest_type:
        last = ttype.children[-1]
        if last.node_type == "primitive_type" and last.value in _SIGNEDNESS:
            # "unsigned h0;" must keep a type after the rewrite
            return False
        if len(declarators) != 1:
            return st.bind(thole.value, _tail(declarators, s))
        return st.bind(thole.value, declarators[0])
    return st.bind(thole.value, _tail([*rest_type, *declarators], s))


def _tail(parts: list[AstNode], s: AstNode) -> AstNode:
    span = (parts[0].span[0], parts[-1].span[1]) if parts else s.span
    return AstNode(DECLARATION_TAIL, tuple(parts), None, span)


def unify(template: AstNode, subject: AstNode, bindings: dict | None = None,
          witnesses: dict | None = None) -> MatchBinding | None:
    st = _State(bindings, witnesses)
    if not _unify(template, subject, st):
        return None
    return MatchBinding(subject, st.bindings, st.witnesses)


def match(pattern: EditPattern | AstNode, ast: Ast) -> list[MatchBinding]:
    """Every statement in ``ast`` that the pattern's lhs unifies with, in source order."""
    lhs = pattern.lhs if isinstance(pattern, EditPattern) else pattern
    out = []
    for stmt in ast.statements():
        b = unify(lhs, stmt)
        if b is not None:
            out.append(b)
    return out


# -- application ---------------------------------------------------------------

def _line_bounds(text: str, start: int, end: int) -> tuple[int, int] | None:
    """(line_start, next_line_start) when [start, end) fills whole lines, else None."""
    ls = text.rfind("\n", 0, start) + 1
    if text[ls:start].strip():
        return None
    le = text.find("\n", end)
    le = len(text) if le < 0 else le
    if text[end:le].strip():
        return None
    return ls, min(le + 1, len(text))


def _line_at(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1


def apply(binding: MatchBinding, pattern: EditPattern, ast: Ast) -> Applied:
    """Rewrite ``binding.site`` with the instantiated rhs; everything else is untouched."""
    unbound = set(tpl.holes_in(pattern.rhs)) - set(binding.bindings)
    if unbound:
        raise UnboundHole(f"holes {sorted(unbound)} have no binding")
    text = ast.text
    s, e = binding.site.span
    normal_lines = (_line_at(text, s), _line_at(text, max(s, e - 1)))
    if pattern.rhs is None:
        parent = ast.parent_map().get(id(binding.site))
        if parent is not None and parent.node_type in ("compound_statement", "case_statement"):
            bounds = _line_bounds(text, s, e)
            if bounds is not None:
                start, stop = bounds
            else:
                start, stop = s, e
                while stop < len(text) and text[stop] in " \t":
                    stop += 1
            new_text = ""
        else:
            # a statement is grammatically required here (e.g. an if body)
            start, stop, new_text = s, e, ";"
    else:
        start, stop = s, e
        new_text = tpl.render(pattern.rhs, binding.bindings, binding.glob_witnesses)
    vulnerable = text[:start] + new_text + text[stop:]
    try:
        new_ast = parse_function(vulnerable)
    except ParseError as exc:
        raise ApplyError(f"rewritten function does not parse: {exc}") from None
    first = _line_at(vulnerable, start)
    last = _line_at(vulnerable, max(start, start + len(new_text) - 1)) if new_text else first
    edit = Edit(start, text[start:stop], new_text, normal_lines, (first, last))
    return Applied(new_ast, edit)


def revert_check(normal: str, vulnerable: str, edit: Edit, pattern: EditPattern,
                 binding: MatchBinding) -> bool:
    """True when undoing ``edit`` restores ``normal`` byte-for-byte and the pattern's
    lhs, re-matched at the restored site, yields the recorded bindings."""
    if edit.revert(vulnerable) != normal:
        return False
    try:
        restored = parse_function(normal)
    except ParseError:
        return False
    for stmt in restored.statements():
        if stmt.span == binding.site.span:
            again = unify(pattern.lhs, stmt)
            if again is not None and again.bindings == binding.bindings \
                    and again.glob_witnesses == binding.glob_witnesses:
                return True
    return False


def tokens_equal(a: str, b: str) -> bool:
    return token_texts(a) == token_texts(b)
