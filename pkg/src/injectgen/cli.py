"""Command-line entry point: preprocess, mine, train, generate, inspect.

Every successful command prints a JSON summary on stdout and writes the same
summary, with the resolved configuration, next to its outputs.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .code_model import SourceUnit, assemble_input, read_corpus
from .config import ConfigError, RunConfig, load_config
from .syntax import ParseError, parse_function, to_sexpr

log = logging.getLogger("injectgen")

EXIT_CONFIG = 1
EXIT_CORPUS = 2
EXIT_NO_TRAINING = 3
EXIT_DIVERGED = 4
EXIT_MISSING_MODEL = 5

STAGE_KEYS = {"cap": "CAP", "token": "MSP_IT_MIP", "isp": "ISP", "finetune": "finetune"}


class CommandFailed(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _summary(cfg: RunConfig, command: str, body: dict) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"command": command, **body}
    with open(out / f"{command}.json", "w", encoding="utf-8") as fh:
        json.dump({**summary, "config": cfg.to_dict()}, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return summary


def _units(cfg: RunConfig, rejects: Path | None = None) -> list[tuple[int, SourceUnit]]:
    try:
        path = cfg.require_path("corpus")
        units = list(read_corpus(path, rejects))
    except (ConfigError, OSError, UnicodeDecodeError) as exc:
        raise CommandFailed(EXIT_CORPUS, f"corpus unreadable: {exc}") from exc
    return units[:cfg.limit] if cfg.limit is not None else units


# -- preprocess ---------------------------------------------------------------------

def _artifact(index: int, unit: SourceUnit) -> dict:
    from .value_flow import build_vfg
    ast = parse_function(unit.text)
    inp = assemble_input(unit, ast)
    vfg = build_vfg(ast, inp)
    return {
        "index": index, "project": unit.project_id, "path": unit.path, "name": unit.function_name,
        "ast": to_sexpr(ast.root),
        "code_tokens": inp.code_tokens,
        "ast_tokens": inp.ast_tokens,
        "var_occurrences": {str(k): v for k, v in sorted(inp.var_occurrences.items())},
        "vfg": {"nodes": [[o.index, o.name, o.line] for o in sorted(vfg.nodes.values())],
                "edges": [list(e) for e in vfg.edges]},
    }


def cmd_preprocess(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    cache = out / "cache"
    cache.mkdir(parents=True, exist_ok=True)
    rejects = out / "rejects.jsonl"
    units = _units(cfg, rejects)
    cached, failed = 0, 0
    with open(rejects, "a", encoding="utf-8") as sidecar:
        for index, unit in units:
            try:
                art = _artifact(index, unit)
            except ParseError as exc:
                sidecar.write(json.dumps({"index": index, "reason": f"parse error: {exc}"}) + "\n")
                failed += 1
                continue
            with open(cache / f"{index:07d}.json", "w", encoding="utf-8") as fh:
                json.dump(art, fh, sort_keys=True)
            cached += 1
    malformed = sum(1 for _ in open(rejects, encoding="utf-8")) - failed
    return _summary(cfg, "preprocess", {"cached": cached, "parse_failures": failed,
                                        "malformed": malformed, "cache": str(cache)})


# -- mine ---------------------------------------------------------------------------

def cmd_mine(cfg: RunConfig) -> dict:
    from .patterns.antiunify import mine_patterns
    from .patterns.catalog import load_manual_catalog, load_mutation_rules, load_seed_patterns
    from .patterns.mutation import mutate
    from .patterns.scoring import (filter_rank, load_judgments, load_training, remove_overgeneral,
                                   score_all, training_edits)
    from .patterns.store import save_patterns

    try:
        samples = load_training(cfg.require_path("training"))
    except (ConfigError, OSError) as exc:
        raise CommandFailed(EXIT_NO_TRAINING, f"training pairs unavailable: {exc}") from exc
    if cfg.limit is not None:
        samples = samples[:cfg.limit]
    edits = training_edits(samples)
    if not edits:
        raise CommandFailed(EXIT_NO_TRAINING, "no usable training pairs")
    mined = filter_rank(score_all(mine_patterns(edits), samples), cfg.top_k)
    seen = {p.key for p in mined}
    merged = list(mined)
    for p in load_seed_patterns() + load_manual_catalog():
        if p.key not in seen:
            seen.add(p.key)
            merged.append(p)
    closed = score_all(mutate(merged, load_mutation_rules()), samples)
    if cfg.judgments:
        closed = remove_overgeneral(closed, load_judgments(cfg.judgments))
    store = filter_rank(closed, len(closed))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = Path(cfg.store) if cfg.store else out / "patterns.json"
    save_patterns(store, path)
    return _summary(cfg, "mine", {"training_pairs": len(samples), "edits": len(edits),
                                  "mined": len(mined), "store_size": len(store), "store": str(path)})


# -- train --------------------------------------------------------------------------

def cmd_train(cfg: RunConfig) -> dict:
    import torch

    from .model.checkpoint import save_checkpoint
    from .model.data import LocationSample, build_datasets
    from .model.train import DivergenceError, train
    from .model.transformer import ContextModel
    from .patterns.scoring import load_training

    seed = cfg.require_seed()
    torch.manual_seed(seed)
    corpus = []
    for _, unit in _units(cfg):
        try:
            corpus.append((unit, parse_function(unit.text)))
        except ParseError:
            continue
    locations = []
    if cfg.training:
        for s in load_training(cfg.require_path("training")):
            try:
                locations.append(LocationSample(s.normal, s.location()[0]))
            except (ParseError, ValueError) as exc:
                log.info("fine-tune pair %s skipped: %s", s.id, exc)
    datasets, vocab = build_datasets(corpus, cfg.model, locations, seed=seed, augment=cfg.augment)
    model = ContextModel(cfg.model, vocab)
    epochs = {stage: cfg.epochs.get(key, cfg.model.epochs) for key, stage in STAGE_KEYS.items()}
    try:
        trace = train(model, datasets, epochs=epochs, seed=seed)
    except DivergenceError as exc:
        raise CommandFailed(EXIT_DIVERGED, f"training diverged: {exc}") from exc
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = Path(cfg.checkpoint) if cfg.checkpoint else out / "model.ckpt"
    save_checkpoint(model, ckpt)
    trace.write_csv(out / "loss.csv")
    return _summary(cfg, "train", {
        "checkpoint": str(ckpt), "loss_csv": str(out / "loss.csv"), "stages": trace.stages(),
        "steps": len(trace.rows), "samples": {k: len(v) for k, v in sorted(datasets.items())},
        "vocab_size": len(vocab.itos)})


# -- generate -----------------------------------------------------------------------

def cmd_generate(cfg: RunConfig) -> dict:
    from .pipeline import MODEL, RULE, generate_corpus
    from .patterns.store import load_patterns

    cfg.require_seed()
    try:
        patterns = load_patterns(cfg.require_path("store"))
        checkpoint = cfg.require_path("checkpoint") if cfg.contextualizer == "model" else None
    except ConfigError as exc:
        raise CommandFailed(EXIT_MISSING_MODEL, str(exc)) from exc
    units = [u for _, u in _units(cfg)]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = out / "dataset.jsonl"
    report = generate_corpus(units, patterns, dataset, RULE if cfg.contextualizer == "rule" else MODEL,
                             checkpoint=checkpoint, workers=cfg.workers)
    return _summary(cfg, "generate", {"dataset": str(dataset), "report": report.to_json(),
                                      "reconciled": report.reconciled})


# -- inspect ------------------------------------------------------------------------

def cmd_inspect(cfg: RunConfig, file: str | None, index: int | None) -> dict:
    from .contextualize import NoStatement, rule_based_locate
    from .patterns.catalog import shipped_patterns
    from .patterns.match import match
    from .patterns.store import load_patterns
    from .value_flow import build_vfg

    if file:
        unit = SourceUnit("", file, "", Path(file).read_text(encoding="utf-8"))
    else:
        units = dict(_units(cfg))
        if index not in units:
            raise CommandFailed(EXIT_CONFIG, f"no corpus record with index {index}")
        unit = units[index]
    try:
        ast = parse_function(unit.text)
    except ParseError as exc:
        raise CommandFailed(EXIT_CONFIG, f"parse error: {exc}") from exc
    inp = assemble_input(unit, ast)
    vfg = build_vfg(ast, inp)
    patterns = load_patterns(cfg.store) if cfg.store and Path(cfg.store).exists() else shipped_patterns()
    matches = [{"pattern": p.id, "line": b.site.line} for p in patterns for b in match(p, ast)]
    try:
        loc = rule_based_locate(ast)
        location = {"statement": loc.resolved_span[0], "line": loc.resolved_span[1], "score": loc.confidence}
    except NoStatement:
        location = None
    body = {"ast": to_sexpr(ast.root), "linearized": inp.ast_tokens,
            "vfg": {"nodes": [f"{o.name}@{o.line}" for o in sorted(vfg.nodes.values())],
                    "edges": [[vfg.nodes[s].name + f"@{vfg.nodes[s].line}",
                               vfg.nodes[d].name + f"@{vfg.nodes[d].line}", why] for s, d, why in vfg.edges]},
            "rule_location": location, "matches": matches}
    return {"command": "inspect", **body}


# -- argument handling --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--limit", type=int, help="use only the first N corpus records")
    common.add_argument("--contextualizer", choices=("model", "rule"))
    common.add_argument("--out", help="output directory")
    common.add_argument("--corpus")
    common.add_argument("--training", help="normal/vulnerable training pairs (JSONL)")
    common.add_argument("--store", help="pattern store (JSON)")
    common.add_argument("--checkpoint")

    parser = argparse.ArgumentParser(prog="injectgen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("preprocess", parents=[common], help="parse the corpus and cache model inputs")
    sub.add_parser("mine", parents=[common], help="mine, rank and mutate edit patterns")
    sub.add_parser("train", parents=[common], help="pre-train and fine-tune the locator model")
    sub.add_parser("generate", parents=[common], help="produce vulnerable samples")
    ins = sub.add_parser("inspect", parents=[common], help="dump AST, value flow and matches for one function")
    which = ins.add_mutually_exclusive_group(required=True)
    which.add_argument("--file", help="C file holding one function")
    which.add_argument("--index", type=int, help="corpus record index")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("VGX_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "workers", "limit", "contextualizer", "out",
                                                "corpus", "training", "store", "checkpoint")}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "preprocess":
            summary = cmd_preprocess(cfg)
        elif args.command == "mine":
            summary = cmd_mine(cfg)
        elif args.command == "train":
            summary = cmd_train(cfg)
        elif args.command == "generate":
            summary = cmd_generate(cfg)
        else:
            summary = cmd_inspect(cfg, args.file, args.index)
    except CommandFailed as exc:
        print(f"injectgen {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"injectgen {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
