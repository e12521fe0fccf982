"""Encoder-decoder localization model."""
from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .attention import EncoderLayer, PositionInputs, relative_index, sinusoid_table
from .config import ModelConfig
from .features import Features
from .ggnn import GGNN, GraphBatch, TrigramEmbedder
from .vocab import Vocab

ENCODER_PREFIXES = ("tok_emb", "embedder", "ggnn", "encoder", "it_head", "cap_head")
DECODER_PREFIXES = ("tgt_pos", "decoder", "out_proj")


class ContextModel(nn.Module):
    def __init__(self, cfg: ModelConfig, vocab: Vocab):
        super().__init__()
        self.cfg = cfg
        self.vocab = vocab
        d = cfg.d_model
        torch.manual_seed(cfg.seed)
        self.tok_emb = nn.Embedding(len(vocab), d)
        self.embedder = TrigramEmbedder(cfg.trigram_buckets, cfg.graph_dim)
        self.ggnn = GGNN(cfg.graph_dim, cfg.ggnn_steps)
        self.encoder = nn.ModuleList(
            EncoderLayer(d, cfg.num_heads, cfg.graph_dim, cfg.rel_clip) for _ in range(cfg.num_layers))
        self.it_head = nn.Linear(d, 2)
        self.cap_head = nn.Linear(d, 2)
        self.tgt_pos = nn.Embedding(cfg.max_target_len + 2, d)
        layer = nn.TransformerDecoderLayer(d, cfg.num_heads, 4 * d, dropout=0.0, batch_first=True)
        self.decoder = nn.TransformerDecoder(layer, cfg.num_layers)
        self.out_proj = nn.Linear(d, len(vocab))
        self.register_buffer("_sinusoid", sinusoid_table(cfg.max_seq_len, d), persistent=False)

    # -- encoder ---------------------------------------------------------
    def vfg_inputs(self, f: Features, n: int) -> tuple:
        if not self.cfg.use_vfg or not f.abs_graphs:
            return None, None, None
        batch = GraphBatch.from_graphs(f.abs_graphs + f.pair_graphs)
        emb = self.ggnn(self.embedder(batch.names), batch.edges, batch.segment, batch.num_graphs)
        n_abs = len(f.abs_graphs)
        vfg_abs = torch.zeros(n, self.cfg.graph_dim)
        vfg_abs = vfg_abs.index_copy(0, torch.tensor(f.abs_positions, dtype=torch.long), emb[:n_abs])
        if f.pair_graphs:
            pairs = torch.tensor(f.pair_positions, dtype=torch.long)
            return vfg_abs, pairs, emb[n_abs:]
        return vfg_abs, None, None

    def positions(self, f: Features) -> PositionInputs:
        n = f.length
        vfg_abs, pairs, pair_emb = self.vfg_inputs(f, n)
        return PositionInputs(relative_index(n, self.cfg.rel_clip), self._sinusoid[:n], vfg_abs, pairs, pair_emb)

    def encode(self, f: Features) -> torch.Tensor:
        pos = self.positions(f)
        x = self.tok_emb(f.ids)
        for layer in self.encoder:
            x = layer(x, pos, self.cfg.use_vfg)
        return x

    # -- decoder ---------------------------------------------------------
    def decode_logits(self, memory: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        t = tgt_in.shape[0]
        y = self.tok_emb(tgt_in) + self.tgt_pos(torch.arange(t))
        causal = nn.Transformer.generate_square_subsequent_mask(t)
        h = self.decoder(y.unsqueeze(0), memory.unsqueeze(0), tgt_mask=causal, tgt_is_causal=True)
        return self.out_proj(h[0])

    def target_ids(self, tokens: list[str]) -> torch.Tensor:
        ids = [self.vocab.bos, *self.vocab.encode(tokens[: self.cfg.max_target_len]), self.vocab.eos]
        return torch.tensor(ids, dtype=torch.long)

    # -- losses ----------------------------------------------------------
    def seq2seq_loss(self, f: Features, target: list[str]) -> torch.Tensor:
        ids = self.target_ids(target)
        logits = self.decode_logits(self.encode(f), ids[:-1])
        return F.cross_entropy(logits, ids[1:])

    def tagging_loss(self, f: Features, bits: list[int]) -> torch.Tensor:
        h = self.encode(f)[: f.n_code]
        labels = torch.tensor(bits[: f.n_code], dtype=torch.long)
        return F.cross_entropy(self.it_head(h), labels)

    def pairing_loss(self, f: Features, label: bool) -> torch.Tensor:
        pooled = self.encode(f).mean(0, keepdim=True)
        return F.cross_entropy(self.cap_head(pooled), torch.tensor([int(label)]))

    # -- inference -------------------------------------------------------
    @torch.no_grad()
    def greedy_decode(self, f: Features, max_len: int | None = None) -> tuple[list[str], float]:
        max_len = max_len or self.cfg.max_target_len
        memory = self.encode(f)
        ids = [self.vocab.bos]
        logprob = 0.0
        for _ in range(max_len + 1):
            logits = self.decode_logits(memory, torch.tensor(ids, dtype=torch.long))[-1]
            lp = torch.log_softmax(logits, -1)
            nxt = int(torch.argmax(lp))
            logprob += float(lp[nxt])
            if nxt == self.vocab.eos:
                break
            ids.append(nxt)
        return self.vocab.decode(ids[1:]), logprob

    def parameter_groups(self) -> dict[str, list[str]]:
        names = [n for n, _ in self.named_parameters()]
        return {"encoder": [n for n in names if n.startswith(ENCODER_PREFIXES)],
                "decoder": [n for n in names if n.startswith(DECODER_PREFIXES)]}
