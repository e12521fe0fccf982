"""Maximal-munch tokenizer for the supported C subset."""
from __future__ import annotations

import re
from dataclasses import dataclass

KEYWORDS = frozenset({
    "auto", "break", "case", "char", "const", "continue", "default", "do",
    "double", "else", "enum", "extern", "float", "for", "goto", "if", "inline",
    "int", "long", "register", "restrict", "return", "short", "signed",
    "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned",
    "void", "volatile", "while", "_Bool",
})

PRIMITIVE_TYPES = frozenset({
    "void", "char", "short", "int", "long", "float", "double", "signed",
    "unsigned", "_Bool",
})
TYPE_QUALIFIERS = frozenset({"const", "volatile", "restrict"})
STORAGE_CLASSES = frozenset({"static", "extern", "auto", "register", "inline", "typedef"})

# longest first so the alternation munches maximally
PUNCTUATORS = sorted([
    "...", ">>=", "<<=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "^=", "|=",
    "+", "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">", "=", "?",
    ":", ";", ",", ".", "(", ")", "[", "]", "{", "}",
], key=len, reverse=True)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f\v]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<pp>\#)
  | (?P<number>(?:0[xX][0-9a-fA-F]+|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)[uUlLfF]*)
  | (?P<identifier>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>L?"(?:\\.|[^"\\\n])*")
  | (?P<char>L?'(?:\\.|[^'\\\n])+')
  | (?P<punct>""" + "|".join(re.escape(p) for p in PUNCTUATORS) + r""")
    """,
    re.VERBOSE | re.DOTALL,
)


class LexError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class Token:
    kind: str  # identifier | keyword | number | string | char | punct
    text: str
    start: int
    end: int
    line: int

    @property
    def is_identifier(self) -> bool:
        return self.kind == "identifier"


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into tokens, dropping whitespace and comments.

    Preprocessor directives are rejected: the subset has no macro layer.
    """
    tokens: list[Token] = []
    pos = 0
    line = 1
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise LexError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "pp":
            raise LexError("preprocessor directives are not supported", pos)
        if kind not in ("ws", "comment"):
            if kind == "identifier" and lexeme in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, lexeme, pos, m.end(), line))
        line += lexeme.count("\n")
        pos = m.end()
    return tokens


def token_texts(text: str) -> list[str]:
    return [t.text for t in tokenize(text)]
