"""A corpus run: every function either yields a sample or a counted discard reason.

Run: python demos/05_generate_dataset.py  (writes demo_dataset.jsonl)
"""
import json
from collections import Counter

from injectgen.code_model import SourceUnit
from injectgen.patterns.catalog import shipped_patterns
from injectgen.pipeline import generate_corpus
from injectgen.synth import planted_corpus


def main():
    # a fifth of the functions carry no planted context and should be discarded
    functions = planted_corpus(200, 11, unplanted_fraction=0.2)
    units = [SourceUnit("toy", f"src/f{k}.c", f"f{k}", f.text) for k, f in enumerate(functions)]
    report = generate_corpus(units, shipped_patterns(), "demo_dataset.jsonl", workers=2)
    print(json.dumps(report.to_json(), indent=1))
    print("reconciled:", report.reconciled)

    records = [json.loads(line) for line in open("demo_dataset.jsonl")]
    print(Counter(r["vuln_type"] for r in records).most_common())
    r = records[0]
    print(f"\nsample {r['id']} ({r['pattern_id']}), injected at lines {r['lines']}:")
    print(r["vulnerable"])


# worker processes are spawned, so the entry point needs the guard
if __name__ == "__main__":
    main()
