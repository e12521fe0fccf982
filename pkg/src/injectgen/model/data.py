"""Assembling training datasets for every stage from parsed functions."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from .. import pretrain_data as pd
from ..code_model import SourceUnit, assemble_input
from ..lexer import token_texts
from ..syntax import Ast, parse_function
from ..value_flow import build_vfg
from .config import ModelConfig
from .features import featurize
from .train import CAP, FINETUNE, IT, ISP, MIP, MSP
from .vocab import Vocab

log = logging.getLogger(__name__)


@dataclass
class LocationSample:
    """A function and the 1-based line of the statement to inject into."""
    text: str
    line: int


def _mip_target(label: dict[str, str]) -> list[str]:
    out: list[str] = []
    for placeholder, name in label.items():
        out += [placeholder, name]
    return out


def _raw_samples(corpus: Sequence[tuple[SourceUnit, Ast]], locations: Sequence[LocationSample],
                 seed: int, objectives: set[str], augment: bool):
    """(objective, ModelInput, ast-or-None, label) before tokenization."""
    raw = []
    inputs = [assemble_input(u, a) for u, a in corpus]
    if CAP in objectives and corpus:
        for s in pd.gen_cap(corpus, seed):
            raw.append((CAP, s.input, corpus[s.meta["index"]][1], s.label))
    for k, (inp, (_, ast)) in enumerate(zip(inputs, corpus)):
        if MSP in objectives:
            try:
                s = pd.gen_msp(inp, seed, k)
                raw.append((MSP, s.input, None, s.label))
            except pd.TooShort:
                pass
        if IT in objectives:
            raw.append((IT, inp, ast, pd.gen_it(inp).label))
        if MIP in objectives:
            s = pd.gen_mip(inp)
            # no value-flow graph here: its node names would reveal the masked identifiers
            raw.append((MIP, s.input, None, _mip_target(s.label)))
    if ISP in objectives and len(corpus) > 1:
        for s in pd.gen_isp(corpus, seed):
            raw.append((ISP, s.input, parse_function(s.meta["text"]), token_texts(s.label)))
    if FINETUNE in objectives:
        for k, loc in enumerate(locations):
            unit = SourceUnit("", "", "", loc.text)
            texts = [(loc.text, None)]
            if augment:
                texts += [(v.variant_text, v.label_span) for v in pd.augment(unit, loc.line, seed + k)]
            for text, span in texts:
                ast = parse_function(text)
                if span is None:
                    span = pd.label_span(ast, loc.line)
                target = token_texts(text[span[0]:span[1]])
                inp = assemble_input(SourceUnit("", "", "", text), ast)
                raw.append((FINETUNE, inp, ast, target))
    return raw


def _label_tokens(objective: str, label) -> list[str]:
    if objective in (CAP, IT):
        return []
    return list(label)


def build_datasets(corpus: Sequence[tuple[SourceUnit, Ast]], cfg: ModelConfig,
                   locations: Sequence[LocationSample] = (), seed: int | None = None,
                   objectives: set[str] | None = None, augment: bool = True,
                   vocab: Vocab | None = None) -> tuple[dict[str, list], Vocab]:
    """Datasets keyed by objective and the vocabulary covering them."""
    seed = cfg.seed if seed is None else seed
    objectives = objectives or {CAP, MSP, IT, MIP, ISP, FINETUNE}
    raw = _raw_samples(corpus, locations, seed, objectives, augment)
    if vocab is None:
        vocab = Vocab.build(inp.sequence + _label_tokens(o, label) for o, inp, _, label in raw)
    datasets: dict[str, list] = {}
    for objective, inp, ast, label in raw:
        vfg = build_vfg(ast, inp) if (ast is not None and cfg.use_vfg and inp.var_occurrences) else None
        datasets.setdefault(objective, []).append((featurize(inp, vocab, cfg, vfg), label))
    log.info("datasets: %s", {k: len(v) for k, v in datasets.items()})
    return datasets, vocab


def parse_corpus(texts: Sequence[str]) -> list[tuple[SourceUnit, Ast]]:
    return [(SourceUnit("", "", "", t), parse_function(t)) for t in texts]

