import hashlib
import json

import pytest

from injectgen import cli
from injectgen.code_model import SourceUnit, write_corpus
from injectgen.model.checkpoint import load_checkpoint
from injectgen.patterns.store import load_patterns
from injectgen.synth import SAVE_PASSWORD, planted_corpus, training_pairs

SMALL_INI = """\
[model]
d_model = 16
num_heads = 2
num_layers = 1
graph_dim = 8
trigram_buckets = 64
max_target_len = 24
batch_size = 8

[train]
augment = false
epochs_cap = 1
epochs_token = 1
epochs_isp = 1
epochs_finetune = 2
"""


@pytest.fixture
def workspace(tmp_path):
    fns = planted_corpus(12, 4, unplanted_fraction=0.25)
    units = [SourceUnit("toy", f"f{k}.c", f"f{k}", fn.text) for k, fn in enumerate(fns)]
    units.append(SourceUnit("kern", "auth.c", "save_password", SAVE_PASSWORD))
    write_corpus(units, tmp_path / "corpus.jsonl")
    with open(tmp_path / "corpus.jsonl", "a") as fh:
        fh.write('{"project": "x"}\n')
        fh.write(json.dumps({"project": "x", "path": "b.c", "name": "b", "code": "int b( {"}) + "\n")
    with open(tmp_path / "train.jsonl", "w") as fh:
        for d in training_pairs(10, 8):
            fh.write(json.dumps(d) + "\n")
    (tmp_path / "small.ini").write_text(SMALL_INI)
    return tmp_path


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if code == 0 else None)


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_preprocess(workspace, capsys):
    code, summary = run(capsys, "preprocess", "--corpus", workspace / "corpus.jsonl",
                        "--out", workspace / "out")
    assert code == 0
    assert (summary["cached"], summary["malformed"], summary["parse_failures"]) == (13, 1, 1)
    art = json.loads((workspace / "out" / "cache" / "0000012.json").read_text())
    assert art["name"] == "save_password"
    assert art["vfg"]["edges"]
    assert len((workspace / "out" / "rejects.jsonl").read_text().splitlines()) == 2
    saved = json.loads((workspace / "out" / "preprocess.json").read_text())
    assert saved["config"]["corpus"].endswith("corpus.jsonl")


def test_preprocess_is_deterministic(workspace, capsys):
    for name in ("a", "b"):
        assert run(capsys, "preprocess", "--corpus", workspace / "corpus.jsonl", "--out", workspace / name)[0] == 0
    files = sorted(p.name for p in (workspace / "a" / "cache").iterdir())
    for name in files:
        assert digest(workspace / "a" / "cache" / name) == digest(workspace / "b" / "cache" / name)


def test_limit(workspace, capsys):
    code, summary = run(capsys, "preprocess", "--corpus", workspace / "corpus.jsonl",
                        "--out", workspace / "out", "--limit", "3")
    assert summary["cached"] == 3


def test_mine_and_generate(workspace, capsys):
    code, summary = run(capsys, "mine", "--training", workspace / "train.jsonl", "--out", workspace / "out")
    assert code == 0
    store = load_patterns(summary["store"])
    assert len(store) == summary["store_size"] > 20
    ranks = [p.rank for p in store]
    assert ranks == sorted(ranks, reverse=True)
    again = workspace / "again.json"
    run(capsys, "mine", "--training", workspace / "train.jsonl", "--out", workspace / "out", "--store", again)
    assert digest(again) == digest(workspace / "out" / "patterns.json")

    code, summary = run(capsys, "generate", "--corpus", workspace / "corpus.jsonl", "--store", again,
                        "--seed", "1", "--out", workspace / "gen")
    assert code == 0 and summary["reconciled"]
    recs = [json.loads(x) for x in (workspace / "gen" / "dataset.jsonl").read_text().splitlines()]
    assert len(recs) == summary["report"]["emitted"] > 0
    assert {"id", "project", "normal", "vulnerable", "lines", "vuln_type", "pattern_id",
            "contextualizer"} <= set(recs[0])


def test_mine_with_judgments_drops_patterns(workspace, capsys):
    _, base = run(capsys, "mine", "--training", workspace / "train.jsonl", "--out", workspace / "a")
    top = load_patterns(base["store"])[0].id
    (workspace / "j.jsonl").write_text(json.dumps({"pattern_id": top, "label": "fp"}) + "\n")
    (workspace / "j.ini").write_text(f"[paths]\njudgments = {workspace / 'j.jsonl'}\n")
    _, pruned = run(capsys, "mine", "--config", workspace / "j.ini", "--training", workspace / "train.jsonl",
                    "--out", workspace / "b")
    assert pruned["store_size"] == base["store_size"] - 1


def test_train_then_model_generate(workspace, capsys):
    args = ["--config", workspace / "small.ini", "--corpus", workspace / "corpus.jsonl",
            "--training", workspace / "train.jsonl", "--seed", "3"]
    code, summary = run(capsys, "train", *args, "--out", workspace / "t1")
    assert code == 0
    assert summary["stages"] == ["CAP", "MSP_IT_MIP", "ISP", "finetune"]
    model = load_checkpoint(summary["checkpoint"])
    assert model.cfg.d_model == 16
    run(capsys, "train", *args, "--out", workspace / "t2")
    assert digest(workspace / "t1" / "loss.csv") == digest(workspace / "t2" / "loss.csv")
    assert digest(workspace / "t1" / "model.ckpt") == digest(workspace / "t2" / "model.ckpt")

    run(capsys, "mine", "--training", workspace / "train.jsonl", "--out", workspace / "m")
    code, summary = run(capsys, "generate", "--corpus", workspace / "corpus.jsonl",
                        "--store", workspace / "m" / "patterns.json", "--checkpoint", workspace / "t1" / "model.ckpt",
                        "--contextualizer", "model", "--seed", "3", "--out", workspace / "g")
    assert code == 0 and summary["reconciled"]
    recs = (workspace / "g" / "dataset.jsonl").read_text().splitlines()
    assert all(json.loads(r)["contextualizer"] == "model" for r in recs)


def test_zero_epoch_train_writes_loadable_checkpoint(workspace, capsys):
    (workspace / "zero.ini").write_text(SMALL_INI.split("[train]")[0] + "[train]\nepochs_cap = 0\nepochs_token = 0\n"
                                      "epochs_isp = 0\nepochs_finetune = 0\n")
    code, summary = run(capsys, "train", "--config", workspace / "zero.ini", "--corpus", workspace / "corpus.jsonl",
                        "--seed", "1", "--out", workspace / "z")
    assert code == 0 and summary["steps"] == 0
    load_checkpoint(summary["checkpoint"])


def test_inspect(workspace, capsys):
    (workspace / "fn.c").write_text(SAVE_PASSWORD)
    code, summary = run(capsys, "inspect", "--file", workspace / "fn.c", "--out", workspace / "o")
    assert code == 0
    assert summary["rule_location"] == {"statement": 4, "line": 7, "score": 3.0}
    assert {"pattern": "s01", "line": 7} in summary["matches"]
    assert any(src.startswith("password@") and dst == "password@7" for src, dst, _ in summary["vfg"]["edges"])
    code, summary = run(capsys, "inspect", "--index", "12", "--corpus", workspace / "corpus.jsonl",
                        "--out", workspace / "o")
    assert code == 0 and summary["rule_location"]["line"] == 7


def test_exit_codes(workspace, capsys):
    assert run(capsys, "preprocess", "--corpus", workspace / "missing.jsonl", "--out", workspace / "o")[0] == cli.EXIT_CORPUS
    assert run(capsys, "mine", "--out", workspace / "o")[0] == cli.EXIT_NO_TRAINING
    (workspace / "empty.jsonl").write_text("")
    assert run(capsys, "mine", "--training", workspace / "empty.jsonl", "--out", workspace / "o")[0] \
        == cli.EXIT_NO_TRAINING
    assert run(capsys, "generate", "--corpus", workspace / "corpus.jsonl", "--seed", "1",
               "--out", workspace / "o")[0] == cli.EXIT_MISSING_MODEL
    run(capsys, "mine", "--training", workspace / "train.jsonl", "--out", workspace / "m")
    assert run(capsys, "generate", "--corpus", workspace / "corpus.jsonl", "--seed", "1",
               "--store", workspace / "m" / "patterns.json", "--contextualizer", "model",
               "--out", workspace / "o")[0] == cli.EXIT_MISSING_MODEL
    assert run(capsys, "generate", "--corpus", workspace / "corpus.jsonl",
               "--store", workspace / "m" / "patterns.json", "--out", workspace / "o")[0] == cli.EXIT_CONFIG
    (workspace / "bad.ini").write_text("[model]\nd_model = 15\nnum_heads = 2\n")
    assert run(capsys, "preprocess", "--config", workspace / "bad.ini", "--corpus",
               workspace / "corpus.jsonl")[0] == cli.EXIT_CONFIG


def test_divergence_exit_code(workspace, capsys, monkeypatch):
    from injectgen.model import train as tr

    def explode(*a, **k):
        raise tr.DivergenceError("loss is nan")
    monkeypatch.setattr(tr, "train", explode)
    code, _ = run(capsys, "train", "--config", workspace / "small.ini", "--corpus", workspace / "corpus.jsonl",
                  "--seed", "1", "--out", workspace / "d")
    assert code == cli.EXIT_DIVERGED
