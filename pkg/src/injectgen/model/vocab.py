"""Token vocabulary shared by the encoder input and the decoder output."""
from __future__ import annotations

from collections import Counter
from typing import Iterable

from ..code_model import SEP, LINEARIZED_TYPES
from ..pretrain_data import sentinel

PAD, UNK, BOS, EOS = "[PAD]", "[UNK]", "[BOS]", "[EOS]"
SPECIALS = (PAD, UNK, BOS, EOS, SEP)
NUM_SENTINELS = 64
NUM_ID_PLACEHOLDERS = 128


class Vocab:
    def __init__(self, tokens: Iterable[str]):
        self.itos: list[str] = []
        self.stoi: dict[str, int] = {}
        for t in (*SPECIALS, *tokens):
            if t not in self.stoi:
                self.stoi[t] = len(self.itos)
                self.itos.append(t)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    @property
    def pad(self) -> int:
        return self.stoi[PAD]

    @property
    def bos(self) -> int:
        return self.stoi[BOS]

    @property
    def eos(self) -> int:
        return self.stoi[EOS]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        unk = self.stoi[UNK]
        return [self.stoi.get(t, unk) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    @classmethod
    def build(cls, token_streams: Iterable[Iterable[str]], min_count: int = 1) -> "Vocab":
        """Fixed symbols first, then corpus tokens by descending count (ties alphabetical)."""
        counts: Counter[str] = Counter()
        for stream in token_streams:
            counts.update(stream)
        fixed = [*sorted(LINEARIZED_TYPES), *(sentinel(k) for k in range(NUM_SENTINELS)),
                 *(f"ID{k}" for k in range(NUM_ID_PLACEHOLDERS))]
        corpus = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
        return cls([*fixed, *corpus])
