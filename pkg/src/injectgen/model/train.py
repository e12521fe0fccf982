"""Staged training: code/AST pairing, then the token objectives, then statement
insertion, then localization fine-tuning."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch

from .transformer import ContextModel

log = logging.getLogger(__name__)

CAP, MSP, IT, MIP, ISP, FINETUNE = "CAP", "MSP", "IT", "MIP", "ISP", "finetune"
TOKEN_STAGE = "MSP_IT_MIP"
SCHEDULE: tuple[tuple[str, tuple[str, ...]], ...] = (
    (CAP, (CAP,)),
    (TOKEN_STAGE, (MSP, IT, MIP)),
    (ISP, (ISP,)),
    (FINETUNE, (FINETUNE,)),
)
ENCODER_ONLY = frozenset({CAP, IT})


class DivergenceError(FloatingPointError):
    pass


@dataclass
class LossTrace:
    rows: list[tuple[str, int, float]] = field(default_factory=list)

    def add(self, stage: str, step: int, loss: float) -> None:
        self.rows.append((stage, step, loss))

    def stage(self, name: str) -> list[float]:
        return [loss for s, _, loss in self.rows if s == name]

    def stages(self) -> list[str]:
        seen: list[str] = []
        for s, _, _ in self.rows:
            if not seen or seen[-1] != s:
                seen.append(s)
        return seen

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stage", "step", "loss"])
            for stage, step, loss in self.rows:
                w.writerow([stage, step, repr(loss)])


def sample_loss(model: ContextModel, objective: str, sample: tuple[Any, Any]) -> torch.Tensor:
    feats, label = sample
    if objective == CAP:
        return model.pairing_loss(feats, label)
    if objective == IT:
        return model.tagging_loss(feats, label)
    return model.seq2seq_loss(feats, label)


def evaluate(model: ContextModel, objective: str, samples: list) -> float:
    """Mean loss without updating anything."""
    if not samples:
        return float("nan")
    with torch.no_grad():
        return float(np.mean([float(sample_loss(model, objective, s)) for s in samples]))


def _draws(objectives: tuple[str, ...], datasets: dict[str, list], epochs: int,
           rng: np.random.Generator) -> list[tuple[str, int]]:
    """(objective, sample index) draws for one stage; mixed stages pick objectives uniformly."""
    live = [o for o in objectives if datasets.get(o)]
    if not live or epochs == 0:
        return []
    total = sum(len(datasets[o]) for o in live) * epochs
    orders = {o: [] for o in live}
    out = []
    for _ in range(total):
        o = live[int(rng.integers(len(live)))] if len(live) > 1 else live[0]
        if not orders[o]:
            orders[o] = list(rng.permutation(len(datasets[o])))
        out.append((o, int(orders[o].pop())))
    return out


def run_stage(model: ContextModel, stage: str, objectives: tuple[str, ...], datasets: dict[str, list],
              epochs: int, trace: LossTrace, rng: np.random.Generator) -> None:
    draws = _draws(objectives, datasets, epochs, rng)
    if not draws:
        return
    cfg = model.cfg
    optim = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    model.train()
    for step, start in enumerate(range(0, len(draws), cfg.batch_size)):
        batch = draws[start:start + cfg.batch_size]
        optim.zero_grad(set_to_none=True)
        total = 0.0
        for objective, idx in batch:
            loss = sample_loss(model, objective, datasets[objective][idx]) / len(batch)
            if not torch.isfinite(loss):
                raise DivergenceError(f"{stage}: non-finite loss at step {step}")
            loss.backward()
            total += float(loss.detach())
        optim.step()
        trace.add(stage, step, total)
    log.info("stage %s: %d steps, last loss %.4f", stage, len(trace.stage(stage)), trace.rows[-1][2])


def train(model: ContextModel, datasets: dict[str, list], epochs: int | dict[str, int] | None = None,
          schedule=SCHEDULE, seed: int | None = None) -> LossTrace:
    """Run every scheduled stage that has data, in order.  Returns the loss trace."""
    seed = model.cfg.seed if seed is None else seed
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    trace = LossTrace()
    for stage, objectives in schedule:
        if isinstance(epochs, int):
            n = epochs
        else:
            n = (epochs or {}).get(stage, model.cfg.epochs)
        run_stage(model, stage, objectives, datasets, n, trace, rng)
    for _, _, loss in trace.rows:
        if not math.isfinite(loss):
            raise DivergenceError("non-finite loss in trace")
    model.eval()
    return trace
