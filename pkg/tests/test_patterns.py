import hashlib
import json
from fractions import Fraction
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import toy_function
from injectgen.patterns import catalog
from injectgen.patterns import template as tpl
from injectgen.patterns.antiunify import (ConcreteEdit, Identical, NotGeneralizable, anti_unify,
                                          extract_edit, mine_patterns)
from injectgen.patterns.catalog import (CATALOG_SIZE, CatalogHashMismatch, load_manual_catalog,
                                        load_mutation_rules, load_seed_patterns, shipped_patterns)
from injectgen.patterns.match import Edit, apply, match, revert_check, unify
from injectgen.patterns.mutation import mutate
from injectgen.patterns.scoring import (TrainingSample, false_negative_report, filter_rank,
                                        remove_overgeneral, score, score_all, training_edits)
from injectgen.patterns.store import (EditPattern, PatternScore, UnboundHole, dumps_patterns,
                                      load_patterns, loads_patterns, save_patterns)
from injectgen.synth import PLANTS, training_pairs
from injectgen.syntax import parse_function, parse_statement


def pat(text, pid="p", vt="t"):
    return EditPattern.from_text(pid, text, vt)


def wrap(body):
    return "int f(int a, int b, char *buf)\n{\n" + body + "\n}\n"


# -- templates and the store ----------------------------------------------------------

def test_template_text_round_trip():
    for p in shipped_patterns(mutated=False):
        again = pat(p.text)
        assert again.key == p.key, p.text


def test_glob_parses_as_glob_node():
    lhs = tpl.parse_template("*free*(h0);")
    kinds = {n.node_type: n.value for n in lhs.walk() if n.node_type in (tpl.GLOB, tpl.HOLE)}
    assert kinds == {tpl.GLOB: "*free*", tpl.HOLE: "h0"}


def test_unbound_rhs_hole_is_rejected():
    with pytest.raises(UnboundHole):
        pat("h0 = 1; => h0 = h1;")


def test_store_round_trip(tmp_path):
    ps = score_all(shipped_patterns(mutated=False)[:5], [])
    ps[0] = EditPattern(ps[0].id, ps[0].lhs, ps[0].rhs, ps[0].vuln_type,
                        scores=PatternScore(3, Fraction(2, 7), 4))
    save_patterns(ps, tmp_path / "s.json")
    back = load_patterns(tmp_path / "s.json")
    assert [p.to_json() for p in back] == [p.to_json() for p in ps]
    assert back[0].scores.s_rank == Fraction(24, 7)


def test_store_version_is_checked():
    doc = json.loads(dumps_patterns([]))
    doc["version"] = 99
    with pytest.raises(ValueError):
        loads_patterns(json.dumps(doc))


# -- shipped data ----------------------------------------------------------------------

def test_catalog_contents():
    cat = load_manual_catalog()
    assert len(cat) == CATALOG_SIZE == 20
    assert [p.id for p in cat] == [f"t{k:02d}" for k in range(1, 21)]
    assert cat[3].text == "*free*(h0); => EMPTY"
    assert cat[3].vuln_type == "Memory Leak (CWE-401)"
    assert cat[19].text == "h0 = calloc(h1, h2); => h0 = malloc(h1 * h2);"
    assert [p.id for p in load_seed_patterns()] == ["s01", "s02", "s03"]


def test_pinned_hashes_match_files():
    for name, digest in catalog.PINNED_SHA256.items():
        raw = resources.files("injectgen.patterns").joinpath("data", name).read_bytes()
        assert hashlib.sha256(raw).hexdigest() == digest


def test_hash_mismatch_refuses_to_load(monkeypatch):
    monkeypatch.setitem(catalog.PINNED_SHA256, "catalog.json", "0" * 64)
    with pytest.raises(CatalogHashMismatch):
        load_manual_catalog()


# -- matching ------------------------------------------------------------------------

def test_match_binds_holes():
    ast = parse_function(wrap("    buf[b - 1] = 0;"))
    [b] = match(pat("h0[h1 - 1] = 0; => h0[h1] = 0;"), ast)
    assert {k: ast.source(v) for k, v in b.bindings.items()} == {"h0": "buf", "h1": "b"}
    assert b.site.line == 3


def test_match_respects_concrete_tokens():
    ast = parse_function(wrap("    buf[b - 2] = 0;"))
    assert match(pat("h0[h1 - 1] = 0; => h0[h1] = 0;"), ast) == []


def test_repeated_hole_must_bind_equal_subtrees():
    p = pat("h0 = h0 + 1;")
    assert match(p, parse_function(wrap("    a = a + 1;")))
    assert not match(p, parse_function(wrap("    a = b + 1;")))


def test_glob_is_case_sensitive():
    p = pat("*free*(h0); => EMPTY")
    assert match(p, parse_function(wrap("    my_free(buf);")))
    assert not match(p, parse_function(wrap("    MyFree(buf);")))
    assert match(pat("*Free*(h0);"), parse_function(wrap("    MyFree(buf);")))


def test_sole_hole_binds_whole_argument_list():
    ast = parse_function(wrap("    memset(buf, 0, b);"))
    [b] = match(pat("memset(h0); => EMPTY"), ast)
    assert ast.source(b.bindings["h0"]) == "(buf, 0, b)"


def test_braced_and_unbraced_bodies_are_equivalent():
    braced = pat("if (h0 == NULL) { return NULL; } => EMPTY")
    ast = parse_function(wrap("    if (buf == NULL)\n        return NULL;"))
    assert len(match(braced, ast)) == 1
    plain = pat("if (h0 == NULL) return NULL; => EMPTY")
    ast = parse_function(wrap("    if (buf == NULL) {\n        return NULL;\n    }"))
    assert len(match(plain, ast)) == 1


def test_unsigned_tail_keeps_a_type():
    p = pat("unsigned h0; => h0;")
    ast = parse_function(wrap("    unsigned int x;\n    unsigned y;"))
    [b] = match(p, ast)
    out = apply(b, p, ast)
    assert "    int x;\n" in out.ast.text


ATOMS = st.sampled_from(["a", "b", "c", "1", "2"])


def _expr(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*", "=="]), children).map(lambda t: f"{t[0]} {t[1]} {t[2]}"),
        st.tuples(st.sampled_from(["f", "g"]), st.lists(children, max_size=2)).map(
            lambda t: f"{t[0]}({', '.join(t[1])})"),
        st.tuples(st.sampled_from(["a", "b"]), children).map(lambda t: f"{t[0]}[{t[1]}]"),
    )


EXPRS = st.recursive(ATOMS, _expr, max_leaves=4)
STMTS = st.one_of(
    st.tuples(st.sampled_from(["a", "b", "a[1]"]), EXPRS).map(lambda t: f"{t[0]} = {t[1]};"),
    EXPRS.map(lambda e: f"{e};"),
)


def _holed(node, chosen, counter):
    """Copy of ``node`` with the pre-order positions in ``chosen`` turned into holes."""
    pos = counter[0]
    counter[0] += 1
    if pos in chosen and node.node_type not in oracles.UNBINDABLE:
        counter[0] += node.node_count() - 1
        return tpl.hole(f"h{pos}")
    if node.is_terminal:
        return node
    return type(node)(node.node_type, tuple(_holed(c, chosen, counter) for c in node.children), node.value)


@settings(max_examples=150)
@given(STMTS, STMTS, st.sets(st.integers(1, 11), max_size=3))
def test_matcher_agrees_with_exhaustive_substitution(subject_text, other_text, chosen):
    subject = parse_statement(subject_text)
    other = parse_statement(other_text)
    if subject.node_count() > 12 or other.node_count() > 12:
        return
    template = _holed(subject, chosen, [0])
    for target in (subject, other):
        found = unify(template, target)
        expected = oracles.bindings(template, target)
        assert (found is not None) == bool(expected), (tpl.render(template), to_text(target))
        if found is not None:
            assert (found.bindings, found.glob_witnesses) in [
                (env, {k: v.value for k, v in genv.items()}) for env, genv in expected]


def to_text(node):
    return " ".join(t.value for t in node.terminals())


# -- application -------------------------------------------------------------------------

def test_apply_drops_storage_class():
    p = catalog.load_manual_catalog()[9]
    ast = parse_function(wrap("    static int x = 3;\n    a = x;"))
    [b] = match(p, ast)
    out = apply(b, p, ast)
    assert out.ast.text == wrap("    int x = 3;\n    a = x;")
    assert out.edit.lines == (3, 3)


def test_identity_pattern_preserves_tokens():
    p = pat("h0 = h1; => h0 = h1;")
    ast = parse_function(wrap("    a = b * (c + 1);"))
    [b] = match(p, ast)
    assert oracles.token_texts(apply(b, p, ast).ast.text) == oracles.token_texts(ast.text)


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_application_only_touches_the_matched_statement(seed):
    ast = parse_function(toy_function(seed, statements=8))
    for p in shipped_patterns()[:30] + [pat("h0 = h1; => h0 = h1 + 1;")]:
        for b in match(p, ast):
            out = apply(b, p, ast)
            e = out.edit
            s, t = b.site.span
            assert out.ast.text[:e.start] == ast.text[:e.start]
            assert out.ast.text[e.start + len(e.new_text):] == ast.text[e.start + len(e.old_text):]
            assert e.start <= s and t <= e.start + len(e.old_text)
            assert ast.text[e.start:s].strip() == "" and ast.text[t:e.start + len(e.old_text)].strip() == ""
            assert revert_check(ast.text, out.ast.text, e, p, b)


def test_deleting_length_check_and_reverting(save_password):
    p = load_seed_patterns()[0]
    ast = parse_function(save_password)
    [b] = match(p, ast)
    assert b.site.line == 7
    out = apply(b, p, ast)
    lines = save_password.split("\n")
    assert out.ast.text == "\n".join(lines[:6] + lines[8:])
    assert out.edit.normal_lines == (7, 8)
    assert revert_check(save_password, out.ast.text, out.edit, p, b)


def test_tampered_revert_fails(save_password):
    p = load_seed_patterns()[0]
    ast = parse_function(save_password)
    [b] = match(p, ast)
    out = apply(b, p, ast)
    bad = Edit(out.edit.start, out.edit.old_text.replace("BUFSIZE", "BUFSZ"), out.edit.new_text,
               out.edit.normal_lines, out.edit.lines)
    assert not revert_check(save_password, out.ast.text, bad, p, b)
    assert not revert_check(save_password, out.ast.text + " ", out.edit, p, b)
    other = match(pat("if (strlen(h0) >= h1) { return -EINVAL; }"), ast)[0]
    other.bindings["h0"] = ast.statements()[0]
    assert not revert_check(save_password, out.ast.text, out.edit, p, other)


# -- edit extraction and anti-unification ---------------------------------------------

def concrete(before, after):
    return ConcreteEdit(parse_statement(before), parse_statement(after) if after else None)


def test_extract_edit_deletion(save_password):
    lines = save_password.split("\n")
    before, after = extract_edit(parse_function(save_password),
                                 parse_function("\n".join(lines[:6] + lines[8:])))
    assert after is None
    assert (before.node_type, before.line, before.end_line) == ("if_statement", 7, 8)


def test_extract_edit_identical_raises(save_password):
    with pytest.raises(Identical):
        extract_edit(parse_function(save_password), parse_function(save_password))


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.sampled_from(sorted(PLANTS)))
def test_extract_recovers_planted_edit(seed, kind):
    d = training_pairs(1, seed, (kind,))[0]
    before, after = extract_edit(parse_function(d["normal"]), parse_function(d["vulnerable"]))
    assert before.line == d["lines"][0]
    assert before.end_line == d["lines"][1]
    assert (after is None) == (kind != "off_by_one")


def test_anti_unify_single_edit_is_identity():
    e = concrete("buf[size - 1] = 0;", "buf[size] = 0;")
    p = anti_unify([e])
    assert p.lhs == e.before and p.rhs == e.after
    assert tpl.holes_in(p.lhs) == []


def test_anti_unify_off_by_one_pair():
    a = concrete("buf[size - 1] = 0;", "buf[size] = 0;")
    b = concrete("name[len - 1] = 0;", "name[len] = 0;")
    p = anti_unify([a, b])
    assert p.text == "h0[h1 - 1] = 0; => h0[h1] = 0;"
    assert anti_unify([b, a]).key == p.key
    for e in (a, b):
        binding = unify(p.lhs, e.before)
        assert binding is not None
        assert oracles.token_texts(tpl.render(p.rhs, binding.bindings)) == \
            [t.value for t in e.after.terminals()]


def test_anti_unify_rejects_mixed_edits():
    with pytest.raises(NotGeneralizable):
        anti_unify([concrete("kfree(p);", None), concrete("a = 1;", "a = 2;")])
    with pytest.raises(NotGeneralizable):
        anti_unify([concrete("a = b;", "a = 1;"), concrete("c = d;", "c = 2;")])


EDIT_BANK = [("kfree(%s);", None), ("%s[n - 1] = 0;", "%s[n] = 0;"), ("mutex_unlock(&%s->lock);", None)]


@settings(max_examples=40)
@given(st.lists(st.tuples(st.integers(0, 2), st.sampled_from(["p", "q", "buf", "dev"])), min_size=2, max_size=5))
def test_generalization_subsumes_every_member(picks):
    edits = [concrete(EDIT_BANK[k][0] % v, EDIT_BANK[k][1] and EDIT_BANK[k][1] % v) for k, v in picks]
    try:
        p = anti_unify(edits)
    except NotGeneralizable:
        assert len({k for k, _ in picks}) > 1
        return
    assert anti_unify(list(reversed(edits))).key == p.key
    for e in edits:
        b = unify(p.lhs, e.before)
        assert b is not None
        if p.rhs is not None:
            assert oracles.token_texts(tpl.render(p.rhs, b.bindings)) == [t.value for t in e.after.terminals()]


def test_mining_covers_every_edit():
    samples = [TrainingSample.from_json(d) for d in training_pairs(10, 5)]
    edits = training_edits(samples)
    mined = mine_patterns(edits)
    for e in edits:
        assert any(unify(p.lhs, e.before) is not None for p in mined)
    assert len({p.key for p in mined}) == len(mined)


# -- scoring ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def five_samples():
    return [TrainingSample.from_json(d) for d in training_pairs(5, 3)]


def test_scores_equal_exhaustive_oracle(five_samples):
    patterns = mine_patterns(training_edits(five_samples)) + shipped_patterns()
    nonzero = 0
    for p in patterns:
        sc = score(p, five_samples)
        assert (sc.s_preval, sc.s_spec, sc.s_ident) == oracles.scores(p, five_samples), p.text
        nonzero += sc.s_preval > 0
    assert nonzero >= 5


def test_score_hand_example():
    normal = wrap("    kfree(buf);\n    a = 1;\n    kfree(buf);")
    vuln = wrap("    a = 1;\n    kfree(buf);")
    s = TrainingSample("x", normal, vuln, "Memory Leak (CWE-401)", (3, 3))
    sc = score(pat("*free*(h0); => EMPTY"), [s])
    assert sc == PatternScore(1, Fraction(1, 2), 1)
    assert sc.s_rank == Fraction(1, 2)
    assert score(pat("h0 = 2;"), [s]) == PatternScore(0, Fraction(0), 0)


def _scored(pid, preval, spec, ident):
    p = pat("h0 = 1;", pid)
    return EditPattern(p.id, p.lhs, p.rhs, p.vuln_type, scores=PatternScore(preval, spec, ident))


def test_filter_rank_order_and_cut():
    ps = [_scored("a", 1, Fraction(1), 2), _scored("b", 2, Fraction(1, 2), 2),
          _scored("c", 4, Fraction(1), 1), _scored("d", 1, Fraction(1, 2), 1)]
    assert [p.id for p in filter_rank(ps, 10)] == ["c", "b", "a", "d"]
    assert [p.id for p in filter_rank(ps, 2)] == ["c", "b"]


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(1, 3), st.integers(0, 2)), max_size=12),
       st.integers(0, 12))
def test_filter_rank_is_a_sorted_prefix(specs, k):
    ps = [_scored(f"p{i:02d}", a, Fraction(1, b), c) for i, (a, b, c) in enumerate(specs)]
    out = filter_rank(ps, k)
    assert len(out) == min(k, len(ps))
    full = filter_rank(ps, len(ps))
    assert out == full[:len(out)]
    for x, y in zip(full, full[1:]):
        assert (x.rank, x.scores.s_preval) >= (y.rank, y.scores.s_preval)
        if (x.rank, x.scores.s_preval) == (y.rank, y.scores.s_preval):
            assert x.id < y.id


def test_remove_overgeneral_threshold():
    ps = [pat("h0 = 1;", "a"), pat("h0 = 2;", "b"), pat("h0 = 3;", "c")]
    judg = [{"pattern_id": "a", "label": lab} for lab in ("fp", "fp", "tp")] + \
           [{"pattern_id": "b", "label": lab} for lab in ("fp", "fp", "tp", "tp")]
    assert [p.id for p in remove_overgeneral(ps, judg)] == ["b", "c"]
    with pytest.raises(ValueError):
        remove_overgeneral(ps, [{"pattern_id": "a", "label": "maybe"}])


@given(st.lists(st.tuples(st.sampled_from("abcd"), st.booleans()), max_size=30))
def test_remove_overgeneral_matches_recount(judged):
    ps = [pat(f"h0 = {k};", pid) for k, pid in enumerate("abcde")]
    judg = [{"pattern_id": pid, "label": "fp" if fp else "tp"} for pid, fp in judged]
    kept = {p.id for p in remove_overgeneral(ps, judg)}
    for pid in "abcde":
        fps = sum(1 for q, fp in judged if q == pid and fp)
        n = sum(1 for q, _ in judged if q == pid)
        assert (pid in kept) == (2 * fps <= n)


def test_false_negative_report(five_samples):
    labels = {s.vuln_type for s in five_samples}
    report = false_negative_report([], five_samples)
    assert set(report) == labels
    assert sorted(sum(report.values(), [])) == sorted(s.id for s in five_samples)
    mined = mine_patterns(training_edits(five_samples))
    assert false_negative_report(mined, five_samples) == {}


# -- mutation -----------------------------------------------------------------------------

def _rule(rid):
    return [r for r in load_mutation_rules() if r.id == rid]


def test_error_code_variants():
    p = pat("if (h0 == NULL) { return -ENOMEM; } => EMPTY")
    out = mutate([p], _rule("error_code"))
    texts = [q.text for q in out[1:]]
    assert len(texts) == 9
    assert "if (h0 == NULL) { return; } => EMPTY" in texts
    assert "if (h0 == NULL) { return NULL; } => EMPTY" in texts
    assert all(q.provenance == {"kind": "mutated", "from": "p", "rule": "error_code"} for q in out[1:])


def test_condition_hole_is_one_way():
    p = pat("if (x == NULL) { return -1; } => EMPTY")
    out = mutate([p], _rule("condition_hole"))
    assert [q.text for q in out] == [p.text, "if (h0) { return -1; } => EMPTY"]
    assert len(mutate([out[1]], _rule("condition_hole"))) == 1


def test_call_assign_round_trip():
    p = pat("kcalloc_wrapper(h0, h1); => kmalloc_wrapper(h0, h1);")
    out = mutate([p], _rule("call_assign"))
    assert len(out) == 2
    back = mutate([EditPattern("m", out[1].lhs, out[1].rhs, "t")], _rule("call_assign"))
    assert {q.key for q in back} == {q.key for q in out}


def test_mutation_closure_is_idempotent():
    base = shipped_patterns(mutated=False)
    closed = mutate(base, load_mutation_rules())
    assert len(closed) == 69
    again = mutate(closed, load_mutation_rules())
    assert [p.key for p in again] == [p.key for p in closed]
    assert [p.id for p in closed[:len(base)]] == [p.id for p in base]
