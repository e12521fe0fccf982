"""Run configuration: an INI file with one section per concern, overridden by flags.

    [paths]     corpus, training, store, checkpoint, out, judgments
    [run]       seed, workers, limit
    [model]     any ModelConfig field
    [train]     epochs_cap, epochs_token, epochs_isp, epochs_finetune, augment
    [pipeline]  contextualizer (rule | model), top_k
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .model.config import ModelConfig


class ConfigError(ValueError):
    pass


PATH_KEYS = ("corpus", "training", "store", "checkpoint", "out", "judgments")


@dataclass
class RunConfig:
    corpus: str | None = None
    training: str | None = None
    store: str | None = None
    checkpoint: str | None = None
    out: str = "out"
    judgments: str | None = None
    seed: int | None = None
    workers: int = 1
    limit: int | None = None
    contextualizer: str = "rule"
    top_k: int = 300
    augment: bool = True
    epochs: dict[str, int] = field(default_factory=dict)
    model: ModelConfig = field(default_factory=ModelConfig)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "model"}
        d["model"] = asdict(self.model)
        return d

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("a seed is required (--seed or [run] seed)")
        return self.seed

    def require_path(self, key: str) -> Path:
        value = getattr(self, key)
        if not value:
            raise ConfigError(f"no {key} path configured")
        path = Path(value)
        if not path.exists():
            raise ConfigError(f"{key} path does not exist: {path}")
        return path


def _coerce(name: str, raw: str, like):
    if isinstance(like, bool):
        low = raw.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
        return low in ("true", "1", "yes")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    model_kw: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        if not parser.read(path, encoding="utf-8"):
            raise ConfigError(f"cannot read config file {path}")
        if parser.has_section("paths"):
            for key, value in parser.items("paths"):
                if key not in PATH_KEYS:
                    raise ConfigError(f"[paths] unknown key {key!r}")
                setattr(cfg, key, value)
        if parser.has_section("run"):
            run = parser["run"]
            if "seed" in run:
                cfg.seed = run.getint("seed")
            if "workers" in run:
                cfg.workers = run.getint("workers")
            if "limit" in run:
                cfg.limit = run.getint("limit")
        if parser.has_section("pipeline"):
            pipe = parser["pipeline"]
            cfg.contextualizer = pipe.get("contextualizer", cfg.contextualizer)
            cfg.top_k = pipe.getint("top_k", cfg.top_k)
        if parser.has_section("train"):
            for key, value in parser.items("train"):
                if key == "augment":
                    cfg.augment = _coerce(key, value, True)
                elif key.startswith("epochs_"):
                    cfg.epochs[key[len("epochs_"):]] = int(value)
                else:
                    raise ConfigError(f"[train] unknown key {key!r}")
        if parser.has_section("model"):
            defaults = ModelConfig()
            for key, value in parser.items("model"):
                if not hasattr(defaults, key):
                    raise ConfigError(f"[model] unknown key {key!r}")
                model_kw[key] = _coerce(key, value, getattr(defaults, key))
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    if cfg.seed is not None:
        model_kw["seed"] = cfg.seed
    try:
        cfg.model = ModelConfig(**model_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.contextualizer not in ("rule", "model"):
        raise ConfigError(f"contextualizer must be 'rule' or 'model', got {cfg.contextualizer!r}")
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")
    return cfg
