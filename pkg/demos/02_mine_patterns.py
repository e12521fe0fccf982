"""From normal/vulnerable pairs to a ranked, mutated pattern store.

Run: python demos/02_mine_patterns.py
"""
from injectgen.patterns.antiunify import ConcreteEdit, anti_unify, mine_patterns
from injectgen.patterns.catalog import load_mutation_rules, load_seed_patterns
from injectgen.patterns.mutation import mutate
from injectgen.patterns.scoring import TrainingSample, filter_rank, score_all, training_edits
from injectgen.synth import training_pairs
from injectgen.syntax import parse_statement

# Two concrete edits that differ only in names generalize to one template
a = ConcreteEdit(parse_statement("buf[size - 1] = 0;"), parse_statement("buf[size] = 0;"))
b = ConcreteEdit(parse_statement("data[len - 1] = 0;"), parse_statement("data[len] = 0;"))
print(anti_unify([a, b]).text)

# A small synthetic training set: each pair removes one planted safety statement
samples = [TrainingSample.from_json(d) for d in training_pairs(12, 1)]
edits = training_edits(samples)
print(len(edits), "edits, e.g.")
print("   ", samples[0].normal.splitlines()[samples[0].lines[0] - 1].strip(), "-> deleted")

# Greedy agglomerative clustering; one pattern per cluster node
mined = mine_patterns(edits)
ranked = filter_rank(score_all(mined, samples), 10)
print(f"\n{'rank':>6} {'prev':>4} {'spec':>6} {'ident':>5}  pattern")
for p in ranked:
    s = p.scores
    print(f"{float(p.rank):6.2f} {s.s_preval:4d} {float(s.s_spec):6.3f} {s.s_ident:5d}  {p.text}")

# Mutation varies safety checks over error codes and exit statements
seed = [p for p in load_seed_patterns() if p.id == "s02"]
closed = mutate(seed, load_mutation_rules())
print(f"\n{seed[0].text}\n  grows to {len(closed)} patterns, for example:")
for p in closed[1:6]:
    print("   ", p.text, " via", p.provenance["rule"])
