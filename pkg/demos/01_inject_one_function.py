"""Inject a vulnerability into one C function and undo it again.

Run: python demos/01_inject_one_function.py
"""
import difflib

from injectgen.contextualize import rule_based_locate
from injectgen.patterns.catalog import shipped_patterns
from injectgen.patterns.match import Edit, match, revert_check
from injectgen.pipeline import generate
from injectgen.synth import SAVE_PASSWORD
from injectgen.syntax import parse_function

print(SAVE_PASSWORD)

# Where would an edit make sense?  The rule locator scores each statement:
# +2 if a shipped pattern matches it, +1 for an "if (...) return ERR;" shape,
# +1 for a call into a known function family (free, mutex, assert, ...).
where = rule_based_locate(SAVE_PASSWORD)
print("chosen statement:", " ".join(where.statement_text))
print("line", where.resolved_span[1], "score", where.confidence)

# Every shipped pattern that matches somewhere in the function
patterns = shipped_patterns()
ast = parse_function(SAVE_PASSWORD)
for p in patterns:
    for b in match(p, ast):
        print(f"  {p.id:>16}  line {b.site.line}: {p.text}")

# The first pattern matching at the chosen location wins
sample = generate(SAVE_PASSWORD, None, patterns)
print("\npattern", sample.pattern_id, "->", sample.vuln_type)
print("".join(difflib.unified_diff(SAVE_PASSWORD.splitlines(True), sample.vulnerable_code.splitlines(True),
                                   "normal.c", "vulnerable.c")))

# The recorded edit reverts byte-for-byte, and the pattern re-matches the restored site
edit = sample.edit
restored = sample.vulnerable_code[:edit["start"]] + edit["old"] + \
    sample.vulnerable_code[edit["start"] + len(edit["new"]):]
print("reverts exactly:", restored == SAVE_PASSWORD)

pattern = next(p for p in patterns if p.id == sample.pattern_id)
binding = next(b for b in match(pattern, ast) if b.site.line == 7)
full = Edit(edit["start"], edit["old"], edit["new"], sample.normal_lines, sample.injected_lines)
print("revert check:", revert_check(SAVE_PASSWORD, sample.vulnerable_code, full, pattern, binding))
