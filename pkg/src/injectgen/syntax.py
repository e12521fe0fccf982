"""Syntax trees and a recursive-descent parser for a C99 function-body subset.

Every token of the source becomes a terminal node, so concatenating the
terminal lexemes re-tokenizes to the original token stream.  Node type names
follow tree-sitter-c where a counterpart exists.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

from .lexer import (
    PRIMITIVE_TYPES,
    STORAGE_CLASSES,
    TYPE_QUALIFIERS,
    LexError,
    Token,
    tokenize,
)

STATEMENT_TYPES = frozenset({
    "compound_statement", "declaration", "expression_statement", "empty_statement",
    "if_statement", "for_statement", "while_statement", "do_statement",
    "switch_statement", "case_statement", "return_statement", "break_statement",
    "continue_statement", "goto_statement", "labeled_statement",
})

TERMINAL_TYPES = frozenset({
    "identifier", "field_identifier", "type_identifier", "statement_identifier",
    "number_literal", "string_literal", "char_literal", "primitive_type",
    "type_qualifier", "storage_class_specifier", "keyword", "punctuation",
})

LITERAL_TYPES = frozenset({"number_literal", "string_literal", "char_literal"})

KNOWN_TYPEDEFS = frozenset({
    "FILE", "BOOL", "DWORD", "WORD", "BYTE", "bool", "u8", "u16", "u32", "u64",
    "s8", "s16", "s32", "s64", "__u8", "__u16", "__u32", "__u64", "__s32",
    "__le16", "__le32", "__be16", "__be32", "uchar", "uint", "ulong",
})

ASSIGNMENT_OPS = frozenset({"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="})

BINARY_PRECEDENCE = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5, "==": 6, "!=": 6,
    "<": 7, ">": 7, "<=": 7, ">=": 7, "<<": 8, ">>": 8,
    "+": 9, "-": 9, "*": 10, "/": 10, "%": 10,
}


def is_typedef_name(name: str) -> bool:
    return name.endswith("_t") or name in KNOWN_TYPEDEFS


@dataclass(frozen=True)
class AstNode:
    """A syntax-tree node.  Equality is structural: spans, roles and lines are ignored."""

    node_type: str
    children: tuple["AstNode", ...] = ()
    value: str | None = None
    span: tuple[int, int] = field(default=(0, 0), compare=False)
    role: str | None = field(default=None, compare=False)
    line: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)

    @property
    def is_terminal(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["AstNode"]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def terminals(self) -> list["AstNode"]:
        return [n for n in self.walk() if n.is_terminal]

    def child(self, name: str) -> "AstNode | None":
        for c in self.children:
            if c.role == name:
                return c
        return None

    def children_by_field(self, name: str) -> list["AstNode"]:
        return [c for c in self.children if c.role == name]

    def node_count(self) -> int:
        return sum(1 for _ in self.walk())

    def with_field(self, name: str | None) -> "AstNode":
        return replace(self, role=name)

    def __repr__(self) -> str:
        return to_sexpr(self)


def to_sexpr(node: AstNode) -> str:
    if node.is_terminal:
        return f"({node.node_type} {_quote(node.value or '')})"
    inner = " ".join(to_sexpr(c) for c in node.children)
    return f"({node.node_type} {inner})"


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


class ParseError(ValueError):
    """Raised for text outside the supported grammar."""

    def __init__(self, message: str, offset: int, expected: str | None = None):
        hint = f" (expected {expected})" if expected else ""
        super().__init__(f"{message} at offset {offset}{hint}")
        self.offset = offset
        self.expected = expected


@dataclass(frozen=True)
class Ast:
    root: AstNode
    text: str
    tokens: tuple[Token, ...]

    def terminals(self) -> list[AstNode]:
        return self.root.terminals()

    def node_count(self) -> int:
        return self.root.node_count()

    def statements(self) -> list[AstNode]:
        """All statement nodes in source (pre-order) order, function body excluded."""
        body = self.root.child("body")
        out = []
        for node in self.root.walk():
            if node.node_type in STATEMENT_TYPES and node is not body:
                out.append(node)
        return out

    def source(self, node: AstNode) -> str:
        return self.text[node.span[0]:node.span[1]]

    def line_of(self, offset: int) -> int:
        return self.text.count("\n", 0, offset) + 1

    def parent_map(self) -> dict[int, AstNode]:
        parents: dict[int, AstNode] = {}
        for node in self.root.walk():
            for c in node.children:
                parents[id(c)] = node
        return parents


class _Parser:
    def __init__(self, text: str, tokens: list[Token]):
        self.text = text
        self.toks = tokens
        self.i = 0

    # -- token helpers -------------------------------------------------
    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.text == text and t.kind in ("punct", "keyword")

    def error(self, message: str, expected: str | None = None) -> ParseError:
        t = self.peek()
        offset = t.start if t else len(self.text)
        return ParseError(message, offset, expected)

    def leaf(self, node_type: str, fld: str | None = None) -> AstNode:
        t = self.peek()
        if t is None:
            raise self.error("unexpected end of input", node_type)
        self.i += 1
        return AstNode(node_type, (), t.text, (t.start, t.end), fld, t.line, t.line)

    def expect(self, text: str, fld: str | None = None) -> AstNode:
        t = self.peek()
        if t is None or t.text != text:
            raise self.error(f"unexpected {t.text if t else 'end of input'!r}", repr(text))
        node_type = "keyword" if t.kind == "keyword" else "punctuation"
        return self.leaf(node_type, fld)

    def node(self, node_type: str, children: list[AstNode], fld: str | None = None) -> AstNode:
        children = [c for c in children if c is not None]
        start, end = children[0].span[0], children[-1].span[1]
        return AstNode(node_type, tuple(children), None, (start, end), fld,
                       children[0].line, children[-1].end_line)

    # -- types ---------------------------------------------------------
    def starts_type(self, k: int = 0) -> bool:
        t = self.peek(k)
        if t is None:
            return False
        if t.kind == "keyword":
            return (t.text in PRIMITIVE_TYPES or t.text in TYPE_QUALIFIERS
                    or t.text in STORAGE_CLASSES or t.text in ("struct", "union", "enum"))
        return t.kind == "identifier" and is_typedef_name(t.text)

    def parse_type(self, fld: str | None = "type") -> AstNode:
        parts: list[AstNode] = []
        have_name = False
        while True:
            t = self.peek()
            if t is None:
                break
            if t.kind == "keyword" and t.text in TYPE_QUALIFIERS:
                parts.append(self.leaf("type_qualifier"))
            elif t.kind == "keyword" and t.text in STORAGE_CLASSES:
                parts.append(self.leaf("storage_class_specifier"))
            elif t.kind == "keyword" and t.text in PRIMITIVE_TYPES:
                parts.append(self.leaf("primitive_type"))
                have_name = True
            elif t.kind == "keyword" and t.text in ("struct", "union", "enum"):
                if have_name:
                    break
                parts.append(self.leaf("keyword"))
                nt = self.peek()
                if nt is None or nt.kind != "identifier":
                    raise self.error("anonymous aggregate types are not supported", "tag name")
                parts.append(self.leaf("type_identifier"))
                have_name = True
            elif t.kind == "identifier" and not have_name:
                parts.append(self.leaf("type_identifier"))
                have_name = True
            else:
                break
        if not parts:
            raise self.error("expected a type", "type specifier")
        return self.node("type", parts, fld)

    def parse_declarator(self, fld: str | None = "declarator", abstract: bool = False) -> AstNode | None:
        if self.at("*"):
            star = self.expect("*")
            quals = []
            while self.peek() and self.peek().kind == "keyword" and self.peek().text in TYPE_QUALIFIERS:
                quals.append(self.leaf("type_qualifier"))
            inner = self.parse_declarator("declarator", abstract)
            return self.node("pointer_declarator", [star, *quals, inner], fld)
        t = self.peek()
        if t is not None and t.kind == "identifier" and not abstract:
            decl = self.leaf("identifier", "declarator")
        elif self.at("(") and not abstract:
            lp = self.expect("(")
            inner = self.parse_declarator("declarator")
            rp = self.expect(")")
            decl = self.node("parenthesized_declarator", [lp, inner, rp], "declarator")
        elif abstract:
            return None
        else:
            raise self.error("expected a declarator", "identifier")
        while True:
            if self.at("["):
                lb = self.expect("[")
                size = None if self.at("]") else self.parse_expression("size")
                rb = self.expect("]")
                decl = self.node("array_declarator", [decl.with_field("declarator"), lb, size, rb], "declarator")
            elif self.at("("):
                params = self.parse_parameter_list()
                decl = self.node("function_declarator", [decl.with_field("declarator"), params], "declarator")
            else:
                break
        return decl.with_field(fld)

    def parse_parameter_list(self) -> AstNode:
        parts = [self.expect("(")]
        while not self.at(")"):
            if self.at("..."):
                parts.append(self.expect("..."))
            else:
                ptype = self.parse_type()
                pdecl = None
                t = self.peek()
                if t is not None and (t.text == "*" or t.kind == "identifier" or t.text == "("):
                    pdecl = self.parse_declarator()
                parts.append(self.node("parameter_declaration", [ptype, pdecl], "parameter"))
            if not self.at(")"):
                parts.append(self.expect(","))
        parts.append(self.expect(")"))
        return self.node("parameter_list", parts, "parameters")

    def parse_type_descriptor(self) -> AstNode:
        ptype = self.parse_type()
        parts = [ptype]
        while self.at("*"):
            parts.append(self.expect("*"))
        return self.node("type_descriptor", parts, "type")

    # -- top level -----------------------------------------------------
    def parse_function(self) -> AstNode:
        ftype = self.parse_type()
        decl = self.parse_declarator()
        inner = decl
        while inner.node_type == "pointer_declarator":
            inner = inner.child("declarator")
        if inner is None or inner.node_type != "function_declarator":
            raise self.error("expected a function definition", "function declarator")
        body = self.parse_compound("body")
        if self.peek() is not None:
            raise self.error("trailing tokens after function body", "end of input")
        return self.node("function_definition", [ftype, decl, body])

    # -- statements ----------------------------------------------------
    def parse_compound(self, fld: str | None = None) -> AstNode:
        parts = [self.expect("{")]
        while not self.at("}"):
            if self.peek() is None:
                raise self.error("unterminated block", "'}'")
            parts.append(self.parse_statement())
        parts.append(self.expect("}"))
        return self.node("compound_statement", parts, fld)

    def looks_like_declaration(self) -> bool:
        t0, t1 = self.peek(), self.peek(1)
        if t0 is None:
            return False
        if t0.kind == "keyword":
            return self.starts_type()
        if t0.kind != "identifier" or t1 is None:
            return False
        if is_typedef_name(t0.text) and (t1.kind == "identifier" or t1.text == "*"):
            return True
        if t1.kind == "identifier":
            return True
        if t1.text == "*":
            k = 1
            while self.peek(k) is not None and self.peek(k).text == "*":
                k += 1
            name, after = self.peek(k), self.peek(k + 1)
            return (name is not None and name.kind == "identifier" and after is not None
                    and after.text in (";", "=", ",", "["))
        return False

    def parse_declaration(self, fld: str | None = None) -> AstNode:
        parts = [self.parse_type()]
        while True:
            decl = self.parse_declarator()
            if self.at("="):
                eq = self.expect("=")
                value = self.parse_initializer("value")
                decl = self.node("init_declarator", [decl, eq, value], "declarator")
            parts.append(decl)
            if self.at(","):
                parts.append(self.expect(","))
                continue
            break
        parts.append(self.expect(";"))
        return self.node("declaration", parts, fld)

    def parse_initializer(self, fld: str | None) -> AstNode:
        if self.at("{"):
            parts = [self.expect("{")]
            while not self.at("}"):
                parts.append(self.parse_initializer(None))
                if not self.at("}"):
                    parts.append(self.expect(","))
            parts.append(self.expect("}"))
            return self.node("initializer_list", parts, fld)
        return self.parse_assignment(fld)

    def parse_statement(self, fld: str | None = None) -> AstNode:
        t = self.peek()
        if t is None:
            raise self.error("unexpected end of input", "statement")
        if t.text == "{" and t.kind == "punct":
            return self.parse_compound(fld)
        if t.text == ";" and t.kind == "punct":
            return self.node("empty_statement", [self.expect(";")], fld)
        if t.kind == "keyword":
            kw = t.text
            if kw == "if":
                parts = [self.expect("if"), self.expect("("), self.parse_expression("condition"),
                         self.expect(")"), self.parse_statement("consequence")]
                if self.at("else"):
                    eparts = [self.expect("else"), self.parse_statement("body")]
                    parts.append(self.node("else_clause", eparts, "alternative"))
                return self.node("if_statement", parts, fld)
            if kw == "while":
                parts = [self.expect("while"), self.expect("("), self.parse_expression("condition"),
                         self.expect(")"), self.parse_statement("body")]
                return self.node("while_statement", parts, fld)
            if kw == "do":
                parts = [self.expect("do"), self.parse_statement("body"), self.expect("while"),
                         self.expect("("), self.parse_expression("condition"), self.expect(")"),
                         self.expect(";")]
                return self.node("do_statement", parts, fld)
            if kw == "for":
                parts = [self.expect("for"), self.expect("(")]
                if self.looks_like_declaration():
                    parts.append(self.parse_declaration("initializer"))
                else:
                    if not self.at(";"):
                        parts.append(self.parse_expression("initializer"))
                    parts.append(self.expect(";"))
                if not self.at(";"):
                    parts.append(self.parse_expression("condition"))
                parts.append(self.expect(";"))
                if not self.at(")"):
                    parts.append(self.parse_expression("update"))
                parts.append(self.expect(")"))
                parts.append(self.parse_statement("body"))
                return self.node("for_statement", parts, fld)
            if kw == "switch":
                parts = [self.expect("switch"), self.expect("("), self.parse_expression("condition"),
                         self.expect(")"), self.parse_switch_body()]
                return self.node("switch_statement", parts, fld)
            if kw == "return":
                parts = [self.expect("return")]
                if not self.at(";"):
                    parts.append(self.parse_expression("value"))
                parts.append(self.expect(";"))
                return self.node("return_statement", parts, fld)
            if kw == "break":
                return self.node("break_statement", [self.expect("break"), self.expect(";")], fld)
            if kw == "continue":
                return self.node("continue_statement", [self.expect("continue"), self.expect(";")], fld)
            if kw == "goto":
                parts = [self.expect("goto"), self.leaf("statement_identifier", "label"), self.expect(";")]
                return self.node("goto_statement", parts, fld)
            if kw in ("case", "default"):
                raise self.error(f"'{kw}' outside switch", "statement")
        if t.kind == "identifier" and self.at(":", 1):
            parts = [self.leaf("statement_identifier", "label"), self.expect(":"), self.parse_statement("body")]
            return self.node("labeled_statement", parts, fld)
        if self.looks_like_declaration():
            return self.parse_declaration(fld)
        expr = self.parse_expression()
        return self.node("expression_statement", [expr, self.expect(";")], fld)

    def parse_switch_body(self) -> AstNode:
        parts = [self.expect("{")]
        while not self.at("}"):
            if self.at("case") or self.at("default"):
                if self.at("case"):
                    cparts = [self.expect("case"), self.parse_conditional("value"), self.expect(":")]
                else:
                    cparts = [self.expect("default"), self.expect(":")]
                while not (self.at("case") or self.at("default") or self.at("}")):
                    if self.peek() is None:
                        raise self.error("unterminated switch", "'}'")
                    cparts.append(self.parse_statement())
                parts.append(self.node("case_statement", cparts))
            else:
                if self.peek() is None:
                    raise self.error("unterminated switch", "'}'")
                parts.append(self.parse_statement())
        parts.append(self.expect("}"))
        return self.node("compound_statement", parts, "body")

    # -- expressions ---------------------------------------------------
    def parse_expression(self, fld: str | None = None) -> AstNode:
        left = self.parse_assignment()
        if self.at(","):
            parts = [left.with_field("left")]
            while self.at(","):
                parts.append(self.expect(","))
                parts.append(self.parse_assignment("right"))
            return self.node("comma_expression", parts, fld)
        return left.with_field(fld)

    def parse_assignment(self, fld: str | None = None) -> AstNode:
        left = self.parse_conditional()
        t = self.peek()
        if t is not None and t.kind == "punct" and t.text in ASSIGNMENT_OPS:
            op = self.leaf("punctuation", "operator")
            right = self.parse_assignment("right")
            return self.node("assignment_expression", [left.with_field("left"), op, right], fld)
        return left.with_field(fld)

    def parse_conditional(self, fld: str | None = None) -> AstNode:
        cond = self.parse_binary(1)
        if self.at("?"):
            q = self.expect("?")
            a = self.parse_expression("consequence")
            c = self.expect(":")
            b = self.parse_conditional("alternative")
            return self.node("conditional_expression", [cond.with_field("condition"), q, a, c, b], fld)
        return cond.with_field(fld)

    def parse_binary(self, min_prec: int) -> AstNode:
        left = self.parse_unary()
        while True:
            t = self.peek()
            if t is None or t.kind != "punct" or t.text not in BINARY_PRECEDENCE:
                return left
            prec = BINARY_PRECEDENCE[t.text]
            if prec < min_prec:
                return left
            op = self.leaf("punctuation", "operator")
            right = self.parse_binary(prec + 1)
            left = self.node("binary_expression", [left.with_field("left"), op, right.with_field("right")])

    def parse_unary(self, fld: str | None = None) -> AstNode:
        t = self.peek()
        if t is None:
            raise self.error("unexpected end of input", "expression")
        if t.kind == "punct":
            if t.text in ("++", "--"):
                op = self.leaf("punctuation", "operator")
                return self.node("update_expression", [op, self.parse_unary("argument")], fld)
            if t.text in ("-", "+", "!", "~"):
                op = self.leaf("punctuation", "operator")
                return self.node("unary_expression", [op, self.parse_unary("argument")], fld)
            if t.text in ("*", "&"):
                op = self.leaf("punctuation", "operator")
                return self.node("pointer_expression", [op, self.parse_unary("argument")], fld)
            if t.text == "(" and self.starts_type(1):
                lp = self.expect("(")
                td = self.parse_type_descriptor()
                rp = self.expect(")")
                if self.at("{"):
                    raise self.error("compound literals are not supported", "expression")
                return self.node("cast_expression", [lp, td, rp, self.parse_unary("value")], fld)
        if t.kind == "keyword" and t.text == "sizeof":
            kw = self.expect("sizeof")
            if self.at("(") and self.starts_type(1):
                lp = self.expect("(")
                td = self.parse_type_descriptor()
                rp = self.expect(")")
                return self.node("sizeof_expression", [kw, lp, td, rp], fld)
            return self.node("sizeof_expression", [kw, self.parse_unary("value")], fld)
        return self.parse_postfix(fld)

    def parse_postfix(self, fld: str | None = None) -> AstNode:
        expr = self.parse_primary()
        while True:
            if self.at("("):
                parts = [self.expect("(")]
                while not self.at(")"):
                    parts.append(self.parse_assignment("argument"))
                    if not self.at(")"):
                        parts.append(self.expect(","))
                parts.append(self.expect(")"))
                args = self.node("argument_list", parts, "arguments")
                expr = self.node("call_expression", [expr.with_field("function"), args])
            elif self.at("["):
                lb = self.expect("[")
                idx = self.parse_expression("index")
                rb = self.expect("]")
                expr = self.node("subscript_expression", [expr.with_field("argument"), lb, idx, rb])
            elif self.at(".") or self.at("->"):
                op = self.leaf("punctuation", "operator")
                t = self.peek()
                if t is None or t.kind != "identifier":
                    raise self.error("expected a field name", "identifier")
                name = self.leaf("field_identifier", "field")
                expr = self.node("field_expression", [expr.with_field("argument"), op, name])
            elif self.at("++") or self.at("--"):
                op = self.leaf("punctuation", "operator")
                expr = self.node("update_expression", [expr.with_field("argument"), op])
            else:
                return expr.with_field(fld)

    def parse_primary(self) -> AstNode:
        t = self.peek()
        if t is None:
            raise self.error("unexpected end of input", "expression")
        if t.kind == "identifier":
            return self.leaf("identifier")
        if t.kind == "number":
            return self.leaf("number_literal")
        if t.kind == "char":
            return self.leaf("char_literal")
        if t.kind == "string":
            parts = [self.leaf("string_literal")]
            while self.peek() is not None and self.peek().kind == "string":
                parts.append(self.leaf("string_literal"))
            return parts[0] if len(parts) == 1 else self.node("concatenated_string", parts)
        if t.text == "(" and t.kind == "punct":
            lp = self.expect("(")
            inner = self.parse_expression()
            rp = self.expect(")")
            return self.node("parenthesized_expression", [lp, inner, rp])
        raise self.error(f"unexpected {t.text!r}", "expression")


def _lex(text: str) -> list[Token]:
    try:
        return tokenize(text)
    except LexError as exc:
        raise ParseError(str(exc).rsplit(" at offset", 1)[0], exc.offset, "token") from None


def parse_function(text: str) -> Ast:
    """Parse one complete function definition."""
    tokens = _lex(text)
    if not tokens:
        raise ParseError("empty input", 0, "function definition")
    p = _Parser(text, tokens)
    root = p.parse_function()
    return Ast(root, text, tuple(tokens))


def parse_statement(text: str) -> AstNode:
    """Parse a single statement (used for templates and donor snippets)."""
    tokens = _lex(text)
    if not tokens:
        raise ParseError("empty input", 0, "statement")
    p = _Parser(text, tokens)
    stmt = p.parse_statement()
    if p.peek() is not None:
        raise p.error("trailing tokens after statement", "end of input")
    return stmt
