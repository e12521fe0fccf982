"""Variable-name embeddings and gated graph message passing over VFG sub-graphs."""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import torch
from torch import nn


def name_trigrams(name: str) -> list[str]:
    padded = f"<{name}>"
    return [padded[i:i + 3] for i in range(max(1, len(padded) - 2))]


def trigram_buckets(name: str, buckets: int) -> list[int]:
    return [zlib.crc32(t.encode()) % buckets for t in name_trigrams(name)]


class TrigramEmbedder(nn.Module):
    """Mean of hashed character-trigram vectors; unseen names still embed."""

    def __init__(self, buckets: int, dim: int):
        super().__init__()
        self.buckets = buckets
        self.table = nn.Embedding(buckets, dim)
        nn.init.normal_(self.table.weight, std=1.0 / math.sqrt(dim))

    def forward(self, names: list[str]) -> torch.Tensor:
        ids, owner = [], []
        for k, name in enumerate(names):
            b = trigram_buckets(name, self.buckets)
            ids.extend(b)
            owner.extend([k] * len(b))
        vecs = self.table(torch.tensor(ids, dtype=torch.long))
        out = torch.zeros(len(names), vecs.shape[1], dtype=vecs.dtype)
        out.index_add_(0, torch.tensor(owner, dtype=torch.long), vecs)
        counts = torch.bincount(torch.tensor(owner, dtype=torch.long), minlength=len(names)).clamp(min=1)
        return out / counts.unsqueeze(1).to(vecs.dtype)


@dataclass
class GraphBatch:
    """Disjoint union of sub-graphs: node names, edges (global node ids) and owning graph."""
    names: list[str]
    edges: torch.Tensor      # (E, 2) long, src -> dst
    segment: torch.Tensor    # (N,) long, graph id per node
    num_graphs: int

    @classmethod
    def from_graphs(cls, graphs: list[tuple[list[str], list[tuple[int, int]]]]) -> "GraphBatch":
        names: list[str] = []
        edges: list[tuple[int, int]] = []
        segment: list[int] = []
        for g, (gnames, gedges) in enumerate(graphs):
            base = len(names)
            names.extend(gnames)
            segment.extend([g] * len(gnames))
            edges.extend((base + s, base + d) for s, d in gedges)
        e = torch.tensor(edges, dtype=torch.long).reshape(-1, 2)
        return cls(names, e, torch.tensor(segment, dtype=torch.long), len(graphs))


class GGNN(nn.Module):
    """h' = GRU(h, sum over incoming edges of g(h_u)), with g linear."""

    def __init__(self, dim: int, steps: int):
        super().__init__()
        self.dim = dim
        self.steps = steps
        self.message = nn.Linear(dim, dim)
        self.w_z, self.u_z = nn.Linear(dim, dim), nn.Linear(dim, dim, bias=False)
        self.w_r, self.u_r = nn.Linear(dim, dim), nn.Linear(dim, dim, bias=False)
        self.w_n, self.u_n = nn.Linear(dim, dim), nn.Linear(dim, dim, bias=False)

    def gru(self, h: torch.Tensor, m: torch.Tensor) -> torch.Tensor:
        z = torch.sigmoid(self.w_z(m) + self.u_z(h))
        r = torch.sigmoid(self.w_r(m) + self.u_r(h))
        n = torch.tanh(self.w_n(m) + self.u_n(r * h))
        return (1 - z) * n + z * h

    def propagate(self, h: torch.Tensor, edges: torch.Tensor, steps: int | None = None) -> torch.Tensor:
        for _ in range(self.steps if steps is None else steps):
            msgs = self.message(h)
            agg = torch.zeros_like(h)
            if edges.numel():
                agg = agg.index_add(0, edges[:, 1], msgs[edges[:, 0]])
            h = self.gru(h, agg)
        return h

    def forward(self, h0: torch.Tensor, edges: torch.Tensor, segment: torch.Tensor,
                num_graphs: int, steps: int | None = None) -> torch.Tensor:
        """Per-graph sum of node states after message passing: (num_graphs, dim)."""
        h = self.propagate(h0, edges, steps)
        out = torch.zeros(num_graphs, h.shape[1], dtype=h.dtype)
        return out.index_add(0, segment, h)


def encode_subgraph(names: list[str], edges: list[tuple[int, int]], embedder: TrigramEmbedder,
                    ggnn: GGNN, steps: int | None = None) -> torch.Tensor:
    """Embedding of one sub-graph with local node ids ``0..len(names)-1``."""
    if not names:
        raise ValueError("sub-graph has no nodes")
    batch = GraphBatch.from_graphs([(names, edges)])
    return ggnn(embedder(batch.names), batch.edges, batch.segment, 1, steps)[0]
