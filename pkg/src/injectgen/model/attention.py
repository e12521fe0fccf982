"""Self-attention with index-based and value-flow-based position encodings.

For one head with query/key/value projections ``Wq, Wk, Wv`` the block computes

    a_ij = s * (q_i . (k_j + rK[d_ij] + rKvfg_ij) + aQ_i . aK_j + aQvfg_i . aKvfg_j)
    z_i  = sum_j softmax_j(a_ij) * (v_j + rV[d_ij] + rVvfg_ij)

where ``s = 1 / sqrt(2 * d_head)``, ``d_ij`` is the clipped offset ``j - i``,
``aQ/aK`` project sinusoidal absolute encodings, ``aQvfg/aKvfg`` project the
embedding of token i's absolute VFG sub-graph, and ``rKvfg/rVvfg`` project the
embedding of the relative sub-graph of the pair (i, j).  VFG terms are zero
for tokens that are not variables and for pairs without a relative sub-graph.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn


@dataclass
class AttentionParams:
    w_q: torch.Tensor   # (H, d, dh)
    w_k: torch.Tensor
    w_v: torch.Tensor
    rel_k: torch.Tensor  # (H, 2*clip+1, dh)
    rel_v: torch.Tensor
    abs_q: torch.Tensor  # (H, d, dh) applied to sinusoids
    abs_k: torch.Tensor
    vfg_q: torch.Tensor  # (H, g, dh) applied to absolute sub-graph embeddings
    vfg_k: torch.Tensor
    vfg_rk: torch.Tensor  # (H, g, dh) applied to relative sub-graph embeddings
    vfg_rv: torch.Tensor

    def tensors(self) -> dict[str, torch.Tensor]:
        return dict(self.__dict__)


@dataclass
class PositionInputs:
    rel_index: torch.Tensor          # (n, n) long, clipped offset shifted to [0, 2*clip]
    sinusoid: torch.Tensor           # (n, d)
    vfg_abs: torch.Tensor | None = None      # (n, g); zero rows for non-variables
    vfg_pairs: torch.Tensor | None = None    # (P, 2) long, (i, j) token positions
    vfg_pair_emb: torch.Tensor | None = None  # (P, g)


class NonFiniteWeights(FloatingPointError):
    pass


def relative_index(n: int, clip: int) -> torch.Tensor:
    pos = torch.arange(n)
    return (pos.unsqueeze(0) - pos.unsqueeze(1)).clamp(-clip, clip) + clip


def sinusoid_table(n: int, d: int, dtype=torch.float32) -> torch.Tensor:
    pos = torch.arange(n, dtype=torch.float64).unsqueeze(1)
    div = torch.exp(torch.arange(0, d, 2, dtype=torch.float64) * (-math.log(10000.0) / d))
    table = torch.zeros(n, d, dtype=torch.float64)
    table[:, 0::2] = torch.sin(pos * div)
    table[:, 1::2] = torch.cos(pos * div)[:, : d // 2]
    return table.to(dtype)


def check_finite(params: AttentionParams) -> None:
    for name, t in params.tensors().items():
        if not torch.isfinite(t).all():
            raise NonFiniteWeights(f"attention weight {name} has non-finite entries")


def attention_block(x: torch.Tensor, params: AttentionParams, pos: PositionInputs,
                    use_vfg: bool = True, return_probs: bool = False):
    """Multi-head attention output before the output projection: (n, H*dh)."""
    check_finite(params)
    n = x.shape[0]
    heads, _, dh = params.w_q.shape
    scale = 1.0 / math.sqrt(2 * dh)
    q = torch.einsum("nd,hde->hne", x, params.w_q)
    k = torch.einsum("nd,hde->hne", x, params.w_k)
    v = torch.einsum("nd,hde->hne", x, params.w_v)
    idx = pos.rel_index.unsqueeze(0).expand(heads, n, n)

    scores = q @ k.transpose(1, 2)
    scores = scores + torch.gather(torch.einsum("hne,hre->hnr", q, params.rel_k), 2, idx)
    aq = torch.einsum("nd,hde->hne", pos.sinusoid, params.abs_q)
    ak = torch.einsum("nd,hde->hne", pos.sinusoid, params.abs_k)
    scores = scores + aq @ ak.transpose(1, 2)
    if use_vfg and pos.vfg_abs is not None:
        vq = torch.einsum("ng,hge->hne", pos.vfg_abs, params.vfg_q)
        vk = torch.einsum("ng,hge->hne", pos.vfg_abs, params.vfg_k)
        scores = scores + vq @ vk.transpose(1, 2)
    has_pairs = use_vfg and pos.vfg_pairs is not None and pos.vfg_pairs.numel() > 0
    if has_pairs:
        pi, pj = pos.vfg_pairs[:, 0], pos.vfg_pairs[:, 1]
        rk = torch.einsum("pg,hge->hpe", pos.vfg_pair_emb, params.vfg_rk)
        contrib = (q[:, pi, :] * rk).sum(-1)
        scores = scores.reshape(heads, n * n).index_add(1, pi * n + pj, contrib).reshape(heads, n, n)
    probs = torch.softmax(scores * scale, dim=-1)

    z = probs @ v
    buckets = torch.zeros(heads, n, params.rel_v.shape[1], dtype=probs.dtype).scatter_add(2, idx, probs)
    z = z + torch.einsum("hnr,hre->hne", buckets, params.rel_v)
    if has_pairs:
        rv = torch.einsum("pg,hge->hpe", pos.vfg_pair_emb, params.vfg_rv)
        z = z.index_add(1, pi, probs[:, pi, pj].unsqueeze(-1) * rv)
    out = z.transpose(0, 1).reshape(n, heads * dh)
    return (out, probs) if return_probs else out


class VfgSelfAttention(nn.Module):
    def __init__(self, d_model: int, num_heads: int, graph_dim: int, rel_clip: int):
        super().__init__()
        dh = d_model // num_heads
        r = 2 * rel_clip + 1

        def param(*shape, fan_in):
            return nn.Parameter(torch.randn(*shape) / math.sqrt(fan_in))

        self.w_q, self.w_k, self.w_v = (param(num_heads, d_model, dh, fan_in=d_model) for _ in range(3))
        self.rel_k, self.rel_v = (param(num_heads, r, dh, fan_in=dh) for _ in range(2))
        self.abs_q, self.abs_k = (param(num_heads, d_model, dh, fan_in=d_model) for _ in range(2))
        self.vfg_q, self.vfg_k, self.vfg_rk, self.vfg_rv = (
            param(num_heads, graph_dim, dh, fan_in=graph_dim) for _ in range(4))
        self.out = nn.Linear(d_model, d_model)

    def params(self) -> AttentionParams:
        return AttentionParams(self.w_q, self.w_k, self.w_v, self.rel_k, self.rel_v, self.abs_q,
                               self.abs_k, self.vfg_q, self.vfg_k, self.vfg_rk, self.vfg_rv)

    def forward(self, x: torch.Tensor, pos: PositionInputs, use_vfg: bool = True) -> torch.Tensor:
        return self.out(attention_block(x, self.params(), pos, use_vfg))


class EncoderLayer(nn.Module):
    def __init__(self, d_model: int, num_heads: int, graph_dim: int, rel_clip: int):
        super().__init__()
        self.attn = VfgSelfAttention(d_model, num_heads, graph_dim, rel_clip)
        self.norm1 = nn.LayerNorm(d_model)
        self.ff = nn.Sequential(nn.Linear(d_model, 4 * d_model), nn.GELU(), nn.Linear(4 * d_model, d_model))
        self.norm2 = nn.LayerNorm(d_model)

    def forward(self, x: torch.Tensor, pos: PositionInputs, use_vfg: bool = True) -> torch.Tensor:
        x = self.norm1(x + self.attn(x, pos, use_vfg))
        return self.norm2(x + self.ff(x))
