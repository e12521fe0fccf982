"""Pre-train and fine-tune a small locator model on toy functions (about a minute on one core).

Run: python demos/04_train_locator.py
"""
import torch

from injectgen.model.config import ModelConfig
from injectgen.model.data import LocationSample, build_datasets, parse_corpus
from injectgen.model.locate import locate
from injectgen.model.train import train
from injectgen.model.transformer import ContextModel
from injectgen.synth import planted_corpus, toy_corpus

torch.set_num_threads(1)

# small enough for a laptop; the defaults are larger
cfg = ModelConfig(d_model=32, num_heads=2, num_layers=1, graph_dim=16, seed=0)

corpus = parse_corpus(toy_corpus(120, 0, 3, 5))
planted = planted_corpus(20, 7)
locations = [LocationSample(f.text, f.planted_line) for f in planted]
datasets, vocab = build_datasets(corpus, cfg, locations, augment=True)
print({k: len(v) for k, v in sorted(datasets.items())}, "samples;", len(vocab.itos), "tokens")

model = ContextModel(cfg, vocab)
trace = train(model, datasets, epochs={"CAP": 1, "MSP_IT_MIP": 1, "ISP": 2, "finetune": 15})
for stage in trace.stages():
    losses = trace.stage(stage)
    print(f"{stage:>10}: loss {losses[0]:.3f} -> {losses[-1]:.3f} over {len(losses)} steps")

# the model decodes the statement text; resolution maps it back to a statement
hits = 0
for f in planted:
    pred = locate(f.text, model)
    ok = pred.resolved and pred.resolved_span[1] == f.planted_line
    hits += ok
print(f"resolved {hits}/{len(planted)} planted statements")
print("example:", " ".join(locate(planted[0].text, model).statement_text))
