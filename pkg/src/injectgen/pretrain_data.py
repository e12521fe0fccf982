"""Sample generators for the pre-training objectives and refactoring augmentation.

Every generator is a pure function of its inputs and a base seed: per-sample
randomness comes from ``numpy.random.SeedSequence([seed, index])``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Iterable, Sequence

import numpy as np

from .code_model import ModelInput, SourceUnit, assemble_input
from .syntax import Ast, AstNode, parse_function

log = logging.getLogger(__name__)

MSP, IT, MIP, CAP, ISP = "MSP", "IT", "MIP", "CAP", "ISP"
OBJECTIVES = (MSP, IT, MIP, CAP, ISP)
MASK_RATE = 0.15
MAX_SPAN = 5
MIN_MSP_TOKENS = 7
DONOR_RETRIES = 64


class TooShort(ValueError):
    pass


class NoViableDonor(RuntimeError):
    pass


def sentinel(k: int) -> str:
    return f"<extra_id_{k}>"


def sample_rng(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


@dataclass
class PretrainSample:
    objective: str
    input: ModelInput
    label: Any
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"objective": self.objective, "input": self.input.sequence,
                "label": self.label, "seed": self.seed}


def write_samples(samples: Iterable[PretrainSample], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_json()) + "\n")
            n += 1
    return n


def _with_code(inp: ModelInput, code: list[str]) -> ModelInput:
    return ModelInput(code, list(inp.ast_tokens), dict(inp.var_occurrences), list(inp.token_lines),
                      list(inp.token_kinds), inp.sep)


# -- mask span prediction ----------------------------------------------------------

def mask_count(n: int) -> int:
    return max(1, int(np.floor(MASK_RATE * n + 0.5)))


def _span_layout(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Non-overlapping, non-adjacent (start, length) spans covering ``mask_count(n)`` tokens."""
    m = mask_count(n)
    lengths: list[int] = []
    while sum(lengths) < m:
        lengths.append(int(rng.integers(1, MAX_SPAN + 1)))
    lengths[-1] -= sum(lengths) - m
    k = len(lengths)
    # stars and bars: k spans, k-1 mandatory single gaps, the rest spread freely
    free = n - m - (k - 1)
    cuts = np.sort(rng.choice(free + k, size=k, replace=False))
    gaps = [int(cuts[0])] + [int(cuts[i] - cuts[i - 1] - 1) for i in range(1, k)]
    spans, pos = [], 0
    for i, (gap, length) in enumerate(zip(gaps, lengths)):
        pos += gap + (1 if i else 0)
        spans.append((pos, length))
        pos += length
    return spans


def gen_msp(inp: ModelInput, seed: int, index: int = 0) -> PretrainSample:
    n = len(inp.code_tokens)
    if n < MIN_MSP_TOKENS:
        raise TooShort(f"{n} code tokens; masking needs at least {MIN_MSP_TOKENS}")
    spans = _span_layout(n, sample_rng(seed, index))
    code, label, pos = [], [], 0
    for k, (start, length) in enumerate(spans):
        code.extend(inp.code_tokens[pos:start])
        code.append(sentinel(k))
        label.append(sentinel(k))
        label.extend(inp.code_tokens[start:start + length])
        pos = start + length
    code.extend(inp.code_tokens[pos:])
    masked = ModelInput(code, list(inp.ast_tokens), {}, [], [], inp.sep)
    return PretrainSample(MSP, masked, label, seed, {"spans": spans, "index": index})


# -- identifier objectives --------------------------------------------------------------

def gen_it(inp: ModelInput) -> PretrainSample:
    bits = [1 if kind == "identifier" else 0 for kind in inp.token_kinds]
    return PretrainSample(IT, inp, bits)


def gen_mip(inp: ModelInput) -> PretrainSample:
    names: dict[str, str] = {}
    code = []
    for tok, kind in zip(inp.code_tokens, inp.token_kinds):
        if kind == "identifier":
            code.append(names.setdefault(tok, f"ID{len(names)}"))
        else:
            code.append(tok)
    label = {v: k for k, v in names.items()}
    return PretrainSample(MIP, _with_code(inp, code), label)


def unmask_mip(sample: PretrainSample) -> list[str]:
    return [sample.label.get(t, t) for t in sample.input.code_tokens]


# -- code/AST pairing ----------------------------------------------------------------

def gen_cap(corpus: Sequence[tuple[SourceUnit, Ast]], seed: int) -> list[PretrainSample]:
    inputs = [assemble_input(u, a) for u, a in corpus]
    linear = [inp.ast_tokens for inp in inputs]
    if len(corpus) == 1:
        log.warning("code/AST pairing: a single-function corpus cannot form negatives")
    out = []
    for i, inp in enumerate(inputs):
        rng = sample_rng(seed, i)
        negative = len(corpus) > 1 and rng.random() < 0.5
        label, ast_tokens = True, inp.ast_tokens
        if negative:
            others = [j for j in range(len(corpus)) if j != i and linear[j] != linear[i]]
            if others:
                j = others[int(rng.integers(len(others)))]
                label, ast_tokens = False, list(linear[j])
            else:
                log.warning("function %d: every other AST linearizes identically; kept positive", i)
        paired = ModelInput(list(inp.code_tokens), ast_tokens, dict(inp.var_occurrences),
                            list(inp.token_lines), list(inp.token_kinds), inp.sep)
        out.append(PretrainSample(CAP, paired, label, seed, {"index": i}))
    return out


# -- statement boundaries (shared by insertion and junk) -------------------------------------

def _line_start(text: str, offset: int) -> int:
    return text.rfind("\n", 0, offset) + 1


def _starts_line(text: str, offset: int) -> bool:
    return not text[_line_start(text, offset):offset].strip()


def _indent(text: str, offset: int) -> str:
    ls = _line_start(text, offset)
    rest = text[ls:offset]
    return rest[:len(rest) - len(rest.lstrip())]


def statement_boundaries(ast: Ast) -> list[tuple[int, str]]:
    """Insertion points (offset, indent) before each block statement and each closing brace."""
    switch_bodies = {id(n.child("body")) for n in ast.root.walk() if n.node_type == "switch_statement"}
    out = []
    for node in ast.root.walk():
        if node.node_type != "compound_statement" or id(node) in switch_bodies:
            continue
        kids = node.children
        for k in range(1, len(kids)):
            target = kids[k]
            if k < len(kids) - 1:
                indent = _indent(ast.text, target.span[0])
            elif len(kids) > 2:
                indent = _indent(ast.text, kids[k - 1].span[0])
            else:
                indent = _indent(ast.text, target.span[0]) + "    "
            out.append((target.span[0], indent))
    return sorted(set(out))


def insertion_text(text: str, offset: int, indent: str, stmt: str) -> tuple[int, str]:
    """Where and what to insert so ``stmt`` lands at ``offset`` with tidy layout."""
    if _starts_line(text, offset):
        return _line_start(text, offset), f"{indent}{stmt}\n"
    return offset, f"{stmt} "


# -- irrelevant statement prediction ---------------------------------------------------------

DONOR_TYPES = ("declaration", "expression_statement")


def _declared_names(stmt: AstNode) -> set[str]:
    if stmt.node_type != "declaration":
        return set()
    names = set()
    for c in stmt.children[1:]:
        node = c.child("declarator") if c.node_type == "init_declarator" else c
        while node is not None and node.node_type != "identifier":
            node = node.child("declarator")
        if node is not None:
            names.add(node.value)
    return names


def _host_names(ast: Ast) -> set[str]:
    return {t.text for t in ast.tokens if t.kind == "identifier"}


def gen_isp(corpus: Sequence[tuple[SourceUnit, Ast]], seed: int) -> list[PretrainSample]:
    """Insert one statement taken from another function into each host function."""
    donors: list[list[str]] = []
    donor_names: list[list[set[str]]] = []
    for _, ast in corpus:
        stmts = [s for s in ast.statements() if s.node_type in DONOR_TYPES and "\n" not in ast.source(s)]
        donors.append([ast.source(s) for s in stmts])
        donor_names.append([_declared_names(s) for s in stmts])
    out = []
    for i, (unit, ast) in enumerate(corpus):
        rng = sample_rng(seed, i)
        pool = [(j, k) for j in range(len(corpus)) if j != i for k in range(len(donors[j]))]
        if not pool:
            raise NoViableDonor(f"function {i}: no statement available from other functions")
        host = _host_names(ast)
        for _ in range(DONOR_RETRIES):
            j, k = pool[int(rng.integers(len(pool)))]
            if not donor_names[j][k] & host:
                break
        else:
            raise NoViableDonor(f"function {i}: every donor drawn redeclares a host name")
        stmt = donors[j][k]
        bounds = statement_boundaries(ast)
        offset, indent = bounds[int(rng.integers(len(bounds)))]
        at, inserted = insertion_text(ast.text, offset, indent, stmt)
        perturbed = ast.text[:at] + inserted + ast.text[at:]
        p_unit = SourceUnit(unit.project_id, unit.path, unit.function_name, perturbed)
        p_input = assemble_input(p_unit, parse_function(perturbed))
        out.append(PretrainSample(ISP, p_input, stmt, seed,
                                  {"index": i, "offset": at, "inserted": inserted, "text": perturbed,
                                   "donor": j}))
    return out


def remove_inserted(sample: PretrainSample) -> str:
    text, at, ins = sample.meta["text"], sample.meta["offset"], sample.meta["inserted"]
    if text[at:at + len(ins)] != ins:
        raise ValueError("inserted statement is not at the recorded offset")
    return text[:at] + text[at + len(ins):]


# -- refactoring augmentation --------------------------------------------------------------

IF_REVERSE, FOR_TO_WHILE, JUNK_INSERT = "IfReverse", "ForToWhile", "JunkInsert"
TRANSFORMS = (IF_REVERSE, FOR_TO_WHILE, JUNK_INSERT)

JUNK_TEMPLATES = (
    "int {a} = {n};",
    "int {a} = {n} + {m};",
    "int {a} = {n} * {m};",
    "int {a} = {n} - {m};",
    "long {a} = {n};",
    "long {a} = {n} * {m};",
    "short {a} = {n};",
    "char {a} = {n};",
    "double {a} = {n}.5;",
    "float {a} = {n}.25;",
    "char {a}[{n}];",
    "int {a}[{n}];",
    "int {a} = {n}; {a} = {a} + {m};",
    "int {a} = {n}; {a} = {a} * {m};",
    "int {a} = {n}; {a}++;",
    "int {a} = {n}; {a}--;",
    "int {a} = {n}; int {b} = {a} + {m};",
    "int {a} = {n}, {b} = {m};",
    "int {a} = {n}; int {b} = {a} << 1;",
    "int {a} = {m}; {a} = {a} ^ {n};",
    "long {a} = {n}; {a} = {a} % {m};",
    "int {a} = {n}; {a} = ({a} > {m}) ? {a} : {m};",
    "int {a} = 0; while ({a} < {n}) {a}++;",
    "int {a} = 0; for (int {b} = 0; {b} < {n}; {b}++) {a} += {b};",
    "int {a} = {n}; if ({a} > {m}) {a} = {m};",
)


@dataclass
class RefactoredVariant:
    original: SourceUnit
    variant_text: str
    transforms: list[tuple[str, int]]
    label_span: tuple[int, int]
    label_lines: tuple[int, int]


_Piece = tuple  # ("copy", start, end) | ("lit", text)


def _splice(text: str, start: int, end: int, pieces: list[_Piece],
            label: tuple[int, int]) -> tuple[str, tuple[int, int]] | None:
    """Replace text[start:end] with ``pieces``; map the label span or give up."""
    out = [text[:start]]
    pos = start
    new_label = None
    ls, le = label
    for piece in pieces:
        if piece[0] == "copy":
            _, s, e = piece
            if s <= ls and le <= e:
                new_label = (pos + ls - s, pos + le - s)
            out.append(text[s:e])
            pos += e - s
        else:
            out.append(piece[1])
            pos += len(piece[1])
    out.append(text[end:])
    delta = pos - end
    if le <= start:
        new_label = label
    elif ls >= end:
        new_label = (ls + delta, le + delta)
    if new_label is None:
        return None
    return "".join(out), new_label


def _body_pieces(text: str, body: AstNode) -> list[_Piece]:
    if body.node_type == "compound_statement":
        return [("copy", *body.span)]
    return [("lit", "{ "), ("copy", *body.span), ("lit", " }")]


def _if_reverse(ast: Ast, label, rng) -> tuple[str, tuple[int, int], int] | None:
    for idx, stmt in enumerate(ast.statements()):
        alt = stmt.child("alternative") if stmt.node_type == "if_statement" else None
        if alt is None:
            continue
        cond, then, other = stmt.child("condition"), stmt.child("consequence"), alt.child("body")
        pieces = [("lit", "if (!("), ("copy", *cond.span), ("lit", ")) "),
                  *_body_pieces(ast.text, other), ("lit", " else "), *_body_pieces(ast.text, then)]
        done = _splice(ast.text, *stmt.span, pieces, label)
        if done is not None:
            return (*done, idx)
    return None


def _has_continue(node: AstNode) -> bool:
    return any(n.node_type == "continue_statement" for n in node.walk())


def _for_to_while(ast: Ast, label, rng) -> tuple[str, tuple[int, int], int] | None:
    parents = ast.parent_map()
    for idx, stmt in enumerate(ast.statements()):
        if stmt.node_type != "for_statement":
            continue
        body = stmt.child("body")
        if _has_continue(body):
            continue
        init, cond, update = stmt.child("initializer"), stmt.child("condition"), stmt.child("update")
        pieces: list[_Piece] = []
        wrap = init is not None and (init.node_type == "declaration"
                                     or parents[id(stmt)].node_type not in ("compound_statement",
                                                                             "case_statement"))
        if wrap:
            pieces.append(("lit", "{ "))
        if init is not None:
            pieces.append(("copy", *init.span))
            pieces.append(("lit", " " if init.node_type == "declaration" else "; "))
        pieces.append(("lit", "while ("))
        pieces.append(("copy", *cond.span) if cond is not None else ("lit", "1"))
        pieces.append(("lit", ") "))
        step = f"{ast.source(update)};" if update is not None else ""
        if body.node_type == "compound_statement":
            close = body.children[-1].span[0]
            if step and _starts_line(ast.text, close) and len(body.children) > 2:
                at = _line_start(ast.text, close)
                indent = _indent(ast.text, body.children[-2].span[0])
                pieces += [("copy", body.span[0], at), ("lit", f"{indent}{step}\n"), ("copy", at, body.span[1])]
            else:
                pieces += [("copy", body.span[0], close), ("lit", f"{step} " if step else ""),
                           ("copy", close, body.span[1])]
        else:
            pieces += [("lit", "{ "), ("copy", *body.span), ("lit", f" {step} }}" if step else " }")]
        if wrap:
            pieces.append(("lit", " }"))
        done = _splice(ast.text, *stmt.span, pieces, label)
        if done is not None:
            return (*done, idx)
    return None


def junk_statement(rng: np.random.Generator) -> str:
    k = int(rng.integers(len(JUNK_TEMPLATES)))
    tag = "".join(rng.choice(list("abcdefghijklmnopqrstuvwxyz"), size=6))
    return JUNK_TEMPLATES[k].format(a=f"junk_{tag}", b=f"junk_{tag}_b",
                                    n=int(rng.integers(1, 64)), m=int(rng.integers(1, 64)))


def _junk_insert(ast: Ast, label, rng) -> tuple[str, tuple[int, int], int] | None:
    ls, le = label
    bounds = [(o, ind) for o, ind in statement_boundaries(ast) if not ls < o < le]
    if not bounds:
        return None
    k = int(rng.integers(len(bounds)))
    offset, indent = bounds[k]
    at, inserted = insertion_text(ast.text, offset, indent, junk_statement(rng))
    done = _splice(ast.text, at, at, [("lit", inserted)], label)
    return (*done, k) if done is not None else None


_TRANSFORM_FNS = {IF_REVERSE: _if_reverse, FOR_TO_WHILE: _for_to_while, JUNK_INSERT: _junk_insert}


def _line_range(text: str, span: tuple[int, int]) -> tuple[int, int]:
    return text.count("\n", 0, span[0]) + 1, text.count("\n", 0, max(span[0], span[1] - 1)) + 1


def label_span(ast: Ast, line: int) -> tuple[int, int]:
    """Span of the outermost statement starting on ``line``."""
    for stmt in ast.statements():
        if stmt.line == line:
            return stmt.span
    raise ValueError(f"no statement starts on line {line}")


def augment(unit: SourceUnit, label_line: int, seed: int = 0) -> list[RefactoredVariant]:
    """Variants for every non-empty subset of applicable transforms, applied in fixed order."""
    base = parse_function(unit.text)
    span0 = label_span(base, label_line)
    variants: list[RefactoredVariant] = []
    seen = {unit.text}
    for size in range(1, len(TRANSFORMS) + 1):
        for subset in combinations(TRANSFORMS, size):
            rng = sample_rng(seed, sum(1 << TRANSFORMS.index(name) for name in subset))
            ast, span, applied = base, span0, []
            for name in subset:
                result = _TRANSFORM_FNS[name](ast, span, rng)
                if result is None:
                    break
                text, span, site = result
                ast = parse_function(text)
                applied.append((name, site))
            else:
                if ast.text in seen:
                    continue
                seen.add(ast.text)
                variants.append(RefactoredVariant(unit, ast.text, applied, span,
                                                  _line_range(ast.text, span)))
    return variants
