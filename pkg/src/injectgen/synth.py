"""Random toy C functions, optionally with a planted injection context.

Used to build desk-scale corpora: pre-training data, planted localization
samples, and pipeline runs where the expected outcome is known per function.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VAR_NAMES = ("count", "total", "idx", "len", "size", "value", "flags", "offset", "limit", "step",
             "acc", "tmp", "res", "mode", "pos", "width", "height", "delta", "shift", "mask")
FUNC_NAMES = ("update", "compute", "process", "handle", "parse", "check", "fill", "scan", "merge", "apply")
CALLEES = ("log_value", "update_stats", "notify", "emit", "record", "trace_point")
# bounds-checked copy into a heap buffer; deleting the length check (lines 7-8) injects an overflow
SAVE_PASSWORD = """\
int save_password(struct session *s, const char *password)
{
    char *buf = kmalloc(BUFSIZE, GFP_KERNEL);
    int ret;
    if (buf == NULL)
        return -ENOMEM;
    if (strlen(password) >= BUFSIZE)
        return -EINVAL;
    strcpy(buf, password);
    ret = store_secret(s, buf);
    kfree(buf);
    return ret;
}
"""

# planted contexts keyed by kind; each admits at least one shipped pattern
PLANTS = {
    "bounds_check": "if (strlen({s}) >= {n})\n{i}    return -EINVAL;",
    "null_check": "if ({p} == NULL) {{\n{i}    return NULL;\n{i}}}",
    "free_call": "kfree({p});",
    "mutex_call": "mutex_unlock(&{p}->lock);",
    "off_by_one": "{p}[{n} - 1] = 0;",
}


@dataclass
class ToyFunction:
    text: str
    planted_line: int | None = None
    planted_kind: str | None = None


class ToyGenerator:
    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def pick(self, seq):
        return seq[int(self.rng.integers(len(seq)))]

    def expr(self, scope: list[str], depth: int = 0) -> str:
        r = self.rng.random()
        if depth > 1 or r < 0.35:
            return self.pick(scope) if self.rng.random() < 0.7 else str(int(self.rng.integers(0, 100)))
        op = self.pick(("+", "-", "*", "&", "|", "<<"))
        return f"{self.expr(scope, depth + 1)} {op} {self.expr(scope, depth + 1)}"

    def cond(self, scope: list[str]) -> str:
        return f"{self.pick(scope)} {self.pick(('<', '>', '==', '!=', '>='))} {self.expr(scope, 1)}"

    def statements(self, scope: list[str], n: int, indent: str, depth: int = 0) -> list[str]:
        out: list[str] = []
        fresh = [v for v in VAR_NAMES if v not in scope]
        for _ in range(n):
            r = self.rng.random()
            if r < 0.25 and fresh:
                name = fresh.pop(int(self.rng.integers(len(fresh))))
                out.append(f"{indent}int {name} = {self.expr(scope)};")
                scope.append(name)
            elif r < 0.55:
                out.append(f"{indent}{self.pick(scope)} = {self.expr(scope)};")
            elif r < 0.7:
                args = ", ".join(self.pick(scope) for _ in range(int(self.rng.integers(1, 3))))
                out.append(f"{indent}{self.pick(CALLEES)}({args});")
            elif r < 0.85 and depth < 2:
                inner = self.statements(list(scope), int(self.rng.integers(1, 3)), indent + "    ", depth + 1)
                out.append(f"{indent}if ({self.cond(scope)}) {{")
                out.extend(inner)
                if self.rng.random() < 0.5:
                    other = self.statements(list(scope), 1, indent + "    ", depth + 1)
                    out.append(f"{indent}}} else {{")
                    out.extend(other)
                out.append(f"{indent}}}")
            elif depth < 2:
                var = self.pick(("i", "j", "k"))
                inner = self.statements(list(scope) + [var], int(self.rng.integers(1, 3)), indent + "    ",
                                        depth + 1)
                out.append(f"{indent}for (int {var} = 0; {var} < {self.pick(scope)}; {var}++) {{")
                out.extend(inner)
                out.append(f"{indent}}}")
            else:
                out.append(f"{indent}{self.pick(scope)} += {int(self.rng.integers(1, 9))};")
        return out

    def function(self, n_statements: int = 6, plant: str | None = None, name: str | None = None) -> ToyFunction:
        fname = name or f"{self.pick(FUNC_NAMES)}_{int(self.rng.integers(1000))}"
        params = ["n", "m"]
        scope = list(params)
        body = self.statements(scope, n_statements, "    ")
        planted_line = None
        header = [f"int {fname}(struct ctx *dev, char *buf, int n, int m)", "{"]
        if plant is not None:
            pointer = "buf" if plant in ("off_by_one", "free_call") else self.pick(("buf", "dev"))
            text = PLANTS[plant].format(s="buf", n=self.pick(("n", "m")), p=pointer, i="")
            k = int(self.rng.integers(len(body) + 1))
            # keep the plant at top level: insert before a top-level line
            while k < len(body) and not _top_level_start(body, k):
                k += 1
            lines = ["    " + ln for ln in text.split("\n")]
            planted_line = len(header) + k + 1
            body = body[:k] + lines + body[k:]
        tail = [f"    return {self.pick(scope)};", "}"]
        return ToyFunction("\n".join(header + body + tail) + "\n", planted_line, plant)


def _top_level_start(body: list[str], k: int) -> bool:
    line = body[k]
    return line.startswith("    ") and not line.startswith("     ") and not line.lstrip().startswith("}")


def toy_corpus(n: int, seed: int, min_statements: int = 4, max_statements: int = 9) -> list[str]:
    gen = ToyGenerator(seed)
    return [gen.function(int(gen.rng.integers(min_statements, max_statements + 1))).text for _ in range(n)]


def planted_corpus(n: int, seed: int, kinds: tuple[str, ...] = tuple(PLANTS),
                   unplanted_fraction: float = 0.0) -> list[ToyFunction]:
    """Functions that each contain one planted context (or none, at the given rate)."""
    gen = ToyGenerator(seed)
    out = []
    for k in range(n):
        plant = None if gen.rng.random() < unplanted_fraction else kinds[k % len(kinds)]
        out.append(gen.function(int(gen.rng.integers(3, 7)), plant))
    return out


def _inject(fn: ToyFunction) -> str:
    """The planted context edited by hand into its vulnerable form."""
    lines = fn.text.split("\n")
    k = fn.planted_line - 1
    if fn.planted_kind == "off_by_one":
        lines[k] = lines[k].replace(" - 1]", "]")
        return "\n".join(lines)
    span = {"bounds_check": 2, "null_check": 3}.get(fn.planted_kind, 1)
    return "\n".join(lines[:k] + lines[k + span:])


def training_pairs(n: int, seed: int, kinds: tuple[str, ...] = tuple(PLANTS)) -> list[dict]:
    """Normal/vulnerable pairs in the training-record layout."""
    labels = {"bounds_check": "Buffer Overflow (CWE-120)", "null_check": "NULL Pointer Dereference (CWE-476)",
              "free_call": "Memory Leak (CWE-401)", "mutex_call": "Race Condition",
              "off_by_one": "Off-by-one Error (CWE-193)"}
    out = []
    for k, fn in enumerate(planted_corpus(n, seed, kinds)):
        span = {"bounds_check": 2, "null_check": 3}.get(fn.planted_kind, 1)
        out.append({"id": f"pair{k:04d}", "normal": fn.text, "vulnerable": _inject(fn),
                    "vuln_type": labels[fn.planted_kind],
                    "lines": [fn.planted_line, fn.planted_line + span - 1]})
    return out
