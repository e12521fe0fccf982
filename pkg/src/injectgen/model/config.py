"""Model hyperparameters."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass
class ModelConfig:
    d_model: int = 64
    num_heads: int = 4
    num_layers: int = 2
    ggnn_steps: int = 2
    max_seq_len: int = 512
    graph_dim: int = 32
    rel_clip: int = 16
    trigram_buckets: int = 2048
    max_vfg_pairs: int = 2048
    max_target_len: int = 64
    lr: float = 1e-3
    epochs: int = 1
    batch_size: int = 8
    seed: int = 0
    use_vfg: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, int) and not isinstance(v, bool) and f.name not in ("seed", "epochs") and v <= 0:
                raise ValueError(f"{f.name} must be positive, got {v}")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.d_model % self.num_heads:
            raise ValueError(f"num_heads ({self.num_heads}) must divide d_model ({self.d_model})")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    @property
    def d_head(self) -> int:
        return self.d_model // self.num_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})
