"""Turning a function into model tensors: token ids plus the VFG sub-graphs to embed."""
from __future__ import annotations

from dataclasses import dataclass, field

import torch

from ..code_model import ModelInput, SourceUnit, assemble_input
from ..syntax import Ast, parse_function
from ..value_flow import ValueFlowGraph, absolute_subgraph, build_vfg, relative_subgraph
from .config import ModelConfig
from .vocab import Vocab

Graph = tuple[list[str], list[tuple[int, int]]]


@dataclass
class Features:
    ids: torch.Tensor                 # (n,) token ids of code [SEP] ast, truncated
    n_code: int                       # code tokens kept (positions < n_code)
    abs_positions: list[int] = field(default_factory=list)
    abs_graphs: list[Graph] = field(default_factory=list)
    pair_positions: list[tuple[int, int]] = field(default_factory=list)
    pair_graphs: list[Graph] = field(default_factory=list)

    @property
    def length(self) -> int:
        return int(self.ids.shape[0])


def _local(sg) -> Graph:
    order = {occ.index: k for k, occ in enumerate(sg.nodes)}
    return [occ.name for occ in sg.nodes], [(order[s], order[d]) for s, d, _ in sg.edges]


def vfg_graphs(vfg: ValueFlowGraph, limit: int, max_pairs: int):
    """Absolute sub-graph per variable and relative sub-graph per reachable ordered pair."""
    abs_pos, abs_graphs, pair_pos, pair_graphs = [], [], [], []
    var_positions = [i for i in sorted(vfg.nodes) if i < limit]
    reach_back = {}
    for i in var_positions:
        sg = absolute_subgraph(vfg, i)
        reach_back[i] = sg.node_indices
        abs_pos.append(i)
        abs_graphs.append(_local(sg))
    for i in var_positions:
        for j in var_positions:
            if len(pair_pos) >= max_pairs:
                return abs_pos, abs_graphs, pair_pos, pair_graphs
            if j not in reach_back[i]:
                continue
            sg = relative_subgraph(vfg, i, j)
            if sg is not None:
                pair_pos.append((i, j))
                pair_graphs.append(_local(sg))
    return abs_pos, abs_graphs, pair_pos, pair_graphs


def featurize(inp: ModelInput, vocab: Vocab, cfg: ModelConfig, vfg: ValueFlowGraph | None = None) -> Features:
    seq = inp.sequence[: cfg.max_seq_len]
    ids = torch.tensor(vocab.encode(seq), dtype=torch.long)
    n_code = min(len(inp.code_tokens), cfg.max_seq_len)
    feats = Features(ids, n_code)
    if vfg is not None and cfg.use_vfg:
        (feats.abs_positions, feats.abs_graphs,
         feats.pair_positions, feats.pair_graphs) = vfg_graphs(vfg, n_code, cfg.max_vfg_pairs)
    return feats


def featurize_text(text: str, vocab: Vocab, cfg: ModelConfig) -> tuple[Features, Ast, ModelInput]:
    ast = parse_function(text)
    inp = assemble_input(SourceUnit("", "", "", text), ast)
    vfg = build_vfg(ast, inp) if cfg.use_vfg else None
    return featurize(inp, vocab, cfg, vfg), ast, inp
