"""Model-based localization: decode a statement and find it in the function."""
from __future__ import annotations

from ..code_model import SourceUnit
from ..contextualize import ContextPrediction, resolve
from .features import featurize_text
from .transformer import ContextModel


def locate(unit: SourceUnit | str, model: ContextModel) -> ContextPrediction:
    text = unit.text if isinstance(unit, SourceUnit) else unit
    feats, ast, _ = featurize_text(text, model.vocab, model.cfg)
    tokens, logprob = model.greedy_decode(feats)
    hit = resolve(ast, tokens)
    if hit is None:
        return ContextPrediction(tokens, None, logprob, None, ast)
    k, stmt = hit
    return ContextPrediction(tokens, (k, stmt.line), logprob, stmt, ast)
