"""Per-function value flow graphs and the sub-graphs used for position encoding.

Nodes are variable occurrences (one per token).  Edges point in the direction
values travel: operand -> assigned variable, definition -> later use.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .code_model import ModelInput
from .syntax import Ast, AstNode

State = dict[str, frozenset[int]]


@dataclass(frozen=True, order=True)
class VariableOccurrence:
    index: int
    name: str
    line: int


@dataclass
class ValueFlowGraph:
    nodes: dict[int, VariableOccurrence] = field(default_factory=dict)
    edges: list[tuple[int, int, str]] = field(default_factory=list)

    def __post_init__(self):
        self._pred: dict[int, list[int]] = {}
        self._succ: dict[int, list[int]] = {}
        for src, dst, _ in self.edges:
            self._succ.setdefault(src, []).append(dst)
            self._pred.setdefault(dst, []).append(src)

    def predecessors(self, index: int) -> list[int]:
        return self._pred.get(index, [])

    def successors(self, index: int) -> list[int]:
        return self._succ.get(index, [])

    def find(self, name: str, line: int) -> list[VariableOccurrence]:
        return [o for o in sorted(self.nodes.values()) if o.name == name and o.line == line]

    def edge_pairs(self) -> set[tuple[int, int]]:
        return {(s, d) for s, d, _ in self.edges}

    def components(self) -> dict[int, int]:
        """Weakly connected component id per node (smallest member index)."""
        comp: dict[int, int] = {}
        for start in sorted(self.nodes):
            if start in comp:
                continue
            queue = deque([start])
            comp[start] = start
            while queue:
                cur = queue.popleft()
                for nxt in (*self.predecessors(cur), *self.successors(cur)):
                    if nxt not in comp:
                        comp[nxt] = start
                        queue.append(nxt)
        return comp

    def to_dot(self) -> str:
        lines = ["digraph vfg {"]
        for occ in sorted(self.nodes.values()):
            lines.append(f'  n{occ.index} [label="{occ.name}@{occ.line}"];')
        for src, dst, why in self.edges:
            lines.append(f'  n{src} -> n{dst} [label="{why}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class VfgSubgraph:
    kind: str  # "absolute" | "relative"
    nodes: tuple[VariableOccurrence, ...]
    edges: tuple[tuple[int, int, str], ...]
    anchor: VariableOccurrence
    target: VariableOccurrence | None = None

    @property
    def node_indices(self) -> frozenset[int]:
        return frozenset(o.index for o in self.nodes)


class _Builder:
    def __init__(self, ast: Ast, model_input: ModelInput):
        self.var_index: dict[int, int] = {}
        var_occ = model_input.var_occurrences
        for i, term in enumerate(ast.root.terminals()):
            if i in var_occ:
                self.var_index[id(term)] = i
        self.nodes = {
            i: VariableOccurrence(i, name, model_input.token_lines[i] if model_input.token_lines else 0)
            for i, name in var_occ.items()
        }
        self.edges: dict[tuple[int, int, str], None] = {}

    def occ(self, node: AstNode) -> int | None:
        return self.var_index.get(id(node))

    def add(self, src: int, dst: int, why: str) -> None:
        self.edges[(src, dst, why)] = None

    def vars_in(self, node: AstNode) -> list[int]:
        return [i for n in node.walk() if (i := self.occ(n)) is not None]

    def use(self, idx: int, state: State) -> None:
        for d in sorted(state.get(self.nodes[idx].name, ())):
            self.add(d, idx, "def_use")

    def define(self, idx: int, state: State) -> None:
        state[self.nodes[idx].name] = frozenset({idx})

    # -- expressions ---------------------------------------------------
    def lvalue_base(self, node: AstNode) -> tuple[int | None, list[AstNode]]:
        """Base variable written by an lvalue plus the sub-expressions it reads."""
        if (i := self.occ(node)) is not None:
            return i, []
        t = node.node_type
        if t in ("subscript_expression",):
            base, reads = self.lvalue_base(node.children[0])
            return base, reads + [node.children[2]]
        if t == "field_expression":
            return self.lvalue_base(node.children[0])
        if t == "pointer_expression" and node.children[0].value == "*":
            return self.lvalue_base(node.children[1])
        if t == "parenthesized_expression":
            return self.lvalue_base(node.children[1])
        if t == "cast_expression":
            return self.lvalue_base(node.children[-1])
        return None, [node]

    def flow_into(self, target: int, value: AstNode, state: State) -> None:
        for s in self.vars_in(value):
            self.add(s, target, "assign")
        for call in (n for n in value.walk() if n.node_type == "call_expression"):
            for arg in call.children[1].children:
                for s in self.vars_in(arg):
                    self.add(s, target, "call_arg")

    def expr(self, node: AstNode, state: State) -> None:
        t = node.node_type
        if t == "assignment_expression":
            left, op, right = node.children
            self.expr(right, state)
            base, reads = self.lvalue_base(left)
            for r in reads:
                self.expr(r, state)
            if base is not None:
                if op.value != "=":
                    self.use(base, state)
                self.flow_into(base, right, state)
                self.define(base, state)
            return
        if t == "update_expression":
            arg = node.children[0] if node.children[0].node_type != "punctuation" else node.children[1]
            base, reads = self.lvalue_base(arg)
            for r in reads:
                self.expr(r, state)
            if base is not None:
                self.use(base, state)
                self.define(base, state)
            return
        if (i := self.occ(node)) is not None:
            self.use(i, state)
            return
        for c in node.children:
            self.expr(c, state)

    # -- declarations and statements -------------------------------------
    def declarator(self, node: AstNode, state: State) -> None:
        t = node.node_type
        if t == "init_declarator":
            decl, _, value = node.children
            self.expr(value, state)
            name_node = _declared_identifier(decl)
            self.declarator_sizes(decl, state)
            if name_node is not None and (i := self.occ(name_node)) is not None:
                self.flow_into(i, value, state)
                self.define(i, state)
            return
        self.declarator_sizes(node, state)
        name_node = _declared_identifier(node)
        if name_node is not None and (i := self.occ(name_node)) is not None:
            self.define(i, state)

    def declarator_sizes(self, node: AstNode, state: State) -> None:
        for n in node.walk():
            if n.node_type == "array_declarator" and n.child("size") is not None:
                self.expr(n.child("size"), state)

    def stmt(self, node: AstNode, state: State) -> State:
        t = node.node_type
        if t == "compound_statement":
            for c in node.children:
                if not c.is_terminal:
                    state = self.stmt(c, state)
            return state
        if t == "declaration":
            for c in node.children[1:]:
                if c.node_type != "punctuation":
                    self.declarator(c, state)
            return state
        if t == "if_statement":
            self.expr(node.child("condition"), state)
            then_state = self.stmt(node.child("consequence"), dict(state))
            alt = node.child("alternative")
            else_state = self.stmt(alt.child("body"), dict(state)) if alt is not None else state
            return _join(then_state, else_state)
        if t in ("while_statement", "for_statement", "do_statement"):
            return self.loop(node, state)
        if t == "switch_statement":
            self.expr(node.child("condition"), state)
            entry = dict(state)
            cur = dict(state)
            for c in node.child("body").children:
                if c.is_terminal:
                    continue
                if c.node_type == "case_statement":
                    cur = _join(entry, cur)
                cur = self.stmt(c, cur)
            return _join(entry, cur)
        if t in ("case_statement", "labeled_statement"):
            for c in node.children:
                if c.node_type in ("identifier", "number_literal") or c.role == "value":
                    self.expr(c, state)
                elif not c.is_terminal:
                    state = self.stmt(c, state)
            return state
        for c in node.children:
            self.expr(c, state)
        return state

    def loop(self, node: AstNode, state: State) -> State:
        init = node.child("initializer")
        cond = node.child("condition")
        update = node.child("update")
        body = node.child("body")
        if init is not None:
            if init.node_type == "declaration":
                state = self.stmt(init, state)
            else:
                self.expr(init, state)
        entry = dict(state)
        cur = dict(state)
        # two passes so definitions at the end of the body reach uses at the top
        for _ in range(2):
            if node.node_type != "do_statement" and cond is not None:
                self.expr(cond, cur)
            cur = self.stmt(body, dict(cur))
            if update is not None:
                self.expr(update, cur)
            if node.node_type == "do_statement":
                self.expr(cond, cur)
            cur = _join(entry, cur)
        return cur


def _declared_identifier(node: AstNode) -> AstNode | None:
    while node is not None and node.node_type != "identifier":
        node = node.child("declarator")
    return node


def _join(a: State, b: State) -> State:
    out = dict(a)
    for name, defs in b.items():
        out[name] = out.get(name, frozenset()) | defs
    return out


def build_vfg(ast: Ast, model_input: ModelInput) -> ValueFlowGraph:
    b = _Builder(ast, model_input)
    state: State = {}
    declarator = ast.root.child("declarator")
    for node in declarator.walk():
        if node.node_type == "parameter_declaration":
            ident = _declared_identifier(node.child("declarator")) if node.child("declarator") else None
            if ident is not None and (i := b.occ(ident)) is not None:
                b.define(i, state)
    b.stmt(ast.root.child("body"), state)
    return ValueFlowGraph(dict(sorted(b.nodes.items())), list(b.edges))


def _reach(vfg: ValueFlowGraph, start: int, reverse: bool) -> set[int]:
    step = vfg.predecessors if reverse else vfg.successors
    seen = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in step(cur):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def _induced(vfg: ValueFlowGraph, keep: set[int]) -> tuple[tuple[int, int, str], ...]:
    return tuple(e for e in vfg.edges if e[0] in keep and e[1] in keep)


def absolute_subgraph(vfg: ValueFlowGraph, anchor: VariableOccurrence | int) -> VfgSubgraph:
    a = anchor if isinstance(anchor, int) else anchor.index
    keep = _reach(vfg, a, reverse=True)
    nodes = tuple(vfg.nodes[i] for i in sorted(keep))
    return VfgSubgraph("absolute", nodes, _induced(vfg, keep), vfg.nodes[a])


def relative_subgraph(vfg: ValueFlowGraph, anchor: VariableOccurrence | int,
                      target: VariableOccurrence | int) -> VfgSubgraph | None:
    """Occurrences on backward paths from ``anchor`` that reach ``target``.

    Direction matters: (a, t) and (t, a) generally differ.
    """
    a = anchor if isinstance(anchor, int) else anchor.index
    t = target if isinstance(target, int) else target.index
    back = _reach(vfg, a, reverse=True)
    if t not in back:
        return None
    keep = back & _reach(vfg, t, reverse=False)
    nodes = tuple(vfg.nodes[i] for i in sorted(keep))
    return VfgSubgraph("relative", nodes, _induced(vfg, keep), vfg.nodes[a], vfg.nodes[t])
