"""Checked-in pattern data: the manual catalog, seed patterns and mutation rules."""
from __future__ import annotations

import hashlib
import json
from importlib import resources

from .mutation import MutationRule, mutate
from .store import EditPattern, loads_patterns

# content hashes of the shipped data files; edit these together with the data
PINNED_SHA256 = {
    "catalog.json": "08ba70e8fefb432307900cc1bce9d7f9cc6699b90ecd68627fd67e75f6977fb9",
    "seed_patterns.json": "4ec025675389b976e5cb35547e913bdcfd1a4578a169925ab738fc750aae5e71",
    "mutation_rules.json": "c6c3463169fe27466f8b3539099ffdeac185fcc2c58c6acd4e9cb1bf8fd3dc9b",
}

CATALOG_SIZE = 20


class CatalogHashMismatch(RuntimeError):
    pass


def read_data(name: str) -> str:
    raw = resources.files(__package__).joinpath("data", name).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != PINNED_SHA256[name]:
        raise CatalogHashMismatch(f"{name}: sha256 {digest} does not match pinned {PINNED_SHA256[name]}")
    return raw.decode("utf-8")


def load_manual_catalog() -> list[EditPattern]:
    patterns = loads_patterns(read_data("catalog.json"))
    assert len(patterns) == CATALOG_SIZE
    return patterns


def load_seed_patterns() -> list[EditPattern]:
    """Safety-check deletions and an off-by-one edit used when no mined store exists."""
    return loads_patterns(read_data("seed_patterns.json"))


def load_mutation_rules() -> list[MutationRule]:
    doc = json.loads(read_data("mutation_rules.json"))
    return [MutationRule.from_json(r) for r in doc["rules"]]


def shipped_patterns(mutated: bool = True) -> list[EditPattern]:
    """Seeds followed by the catalog, optionally closed under the mutation rules."""
    patterns = load_seed_patterns() + load_manual_catalog()
    return mutate(patterns, load_mutation_rules()) if mutated else patterns
