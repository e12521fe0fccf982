"""Single-file checkpoints.

Layout: ``b"VGXM"``, u32 format version, u32 header length, UTF-8 JSON header
(config, vocabulary, tensor names and shapes in order), then every tensor as
raw little-endian float32 in header order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig
from .transformer import ContextModel
from .vocab import Vocab

MAGIC = b"VGXM"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(model: ContextModel, path: str | Path) -> None:
    state = model.state_dict()
    header = {
        "config": model.cfg.to_dict(),
        "vocab": model.vocab.itos,
        "tensors": [[name, list(t.shape)] for name, t in state.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for t in state.values():
            fh.write(t.detach().to(torch.float32).numpy().astype("<f4").tobytes())


def load_checkpoint(path: str | Path) -> ContextModel:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    vocab = Vocab(header["vocab"])
    if vocab.itos != header["vocab"]:
        raise CheckpointError(f"{path}: vocabulary is not in canonical order")
    model = ContextModel(ModelConfig.from_dict(header["config"]), vocab)
    offset = 12 + hlen
    state = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset).reshape(shape)
        state[name] = torch.from_numpy(arr.copy())
        offset += 4 * count
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")
    model.load_state_dict(state)
    model.eval()
    return model
