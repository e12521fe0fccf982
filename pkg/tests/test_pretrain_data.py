import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import toy_function
from injectgen import pretrain_data as pd
from injectgen.code_model import SEP, SourceUnit, assemble_input, linearize
from injectgen.lexer import token_texts, tokenize
from injectgen.syntax import parse_function


def unit(text):
    return SourceUnit("", "", "", text)


def model_input(text):
    return assemble_input(unit(text), parse_function(text))


def parsed(texts):
    return [(unit(t), parse_function(t)) for t in texts]


def body_function(n_tokens):
    # "int f(){" is 5 tokens and "}" is 1; each "x=1;" adds 4
    stmts = "x=1;" * ((n_tokens - 6) // 4)
    return "int f(){" + stmts + "y;" * (((n_tokens - 6) % 4) // 2) + "}"


def test_mask_count_examples():
    assert pd.mask_count(100) == 15
    assert pd.mask_count(7) == 1


def test_msp_hundred_tokens():
    text = body_function(102)
    inp = model_input(text)
    masked = sum(length for _, length in pd.gen_msp(inp, 3).meta["spans"])
    assert masked in (14, 15, 16)


def test_msp_seven_tokens_masks_one():
    inp = model_input("int f(){;}")
    assert len(inp.code_tokens) == 7
    sample = pd.gen_msp(inp, 0)
    assert sum(length for _, length in sample.meta["spans"]) == 1


def test_msp_too_short():
    with pytest.raises(pd.TooShort):
        pd.gen_msp(model_input("int f(){}"), 0)


@given(st.integers(0, 5000), st.integers(0, 2**32 - 1))
def test_msp_spans_label_and_code_only(fseed, seed):
    inp = model_input(toy_function(fseed))
    s = pd.gen_msp(inp, seed)
    spans = s.meta["spans"]
    assert all(1 <= length <= pd.MAX_SPAN for _, length in spans)
    assert all(a + la < b for (a, la), (b, _) in zip(spans, spans[1:]))  # disjoint, non-adjacent
    assert sum(length for _, length in spans) == pd.mask_count(len(inp.code_tokens))
    assert s.input.ast_tokens == inp.ast_tokens and s.input.sequence.count(SEP) == 1
    # rebuild the original code from the masked input and the label
    pieces, k, out = s.label, 0, []
    fills = {}
    for tok in pieces:
        if tok.startswith("<extra_id_"):
            cur = tok
            fills[cur] = []
        else:
            fills[cur].append(tok)
    for tok in s.input.code_tokens:
        out.extend(fills.get(tok, [tok]))
    assert out == inp.code_tokens
    assert pd.gen_msp(inp, seed).label == s.label


def test_it_examples():
    assert pd.gen_it(model_input("void f(){ x = 1 ; }")).label[5:9] == [1, 0, 0, 0]
    inp = model_input("void f(){ foo(bar); }")
    bits = dict(zip(inp.code_tokens, pd.gen_it(inp).label))
    assert bits["foo"] == 1 and bits["bar"] == 1 and bits["("] == 0


@given(st.integers(0, 5000))
def test_it_matches_relex(fseed):
    text = toy_function(fseed)
    assert pd.gen_it(model_input(text)).label == [int(t.kind == "identifier") for t in tokenize(text)]


def test_mip_example():
    s = pd.gen_mip(model_input("void f(){x=x+y;}"))
    assert s.input.code_tokens[5:11] == ["ID1", "=", "ID1", "+", "ID2", ";"]
    assert s.label == {"ID0": "f", "ID1": "x", "ID2": "y"}


@given(st.integers(0, 5000))
def test_mip_round_trip_and_count(fseed):
    inp = model_input(toy_function(fseed))
    s = pd.gen_mip(inp)
    unique = {t for t, k in zip(inp.code_tokens, inp.token_kinds) if k == "identifier"}
    assert len(s.label) == len(unique)
    assert pd.unmask_mip(s) == inp.code_tokens


def test_cap_reproducible_and_negatives_differ():
    corpus = parsed([toy_function(k) for k in range(40)])
    a, b = pd.gen_cap(corpus, 9), pd.gen_cap(corpus, 9)
    assert [s.label for s in a] == [s.label for s in b]
    assert 0 < sum(s.label for s in a) < 40
    for s, (_, ast) in zip(a, corpus):
        if not s.label:
            assert s.input.ast_tokens != linearize(ast)
        else:
            assert s.input.ast_tokens == linearize(ast)


def test_cap_single_function_all_true(caplog):
    s = pd.gen_cap(parsed([toy_function(1)]), 0)
    assert [x.label for x in s] == [True]
    assert "cannot form negatives" in caplog.text


def test_isp_trivial_host():
    at, ins = pd.insertion_text("void f(){a=1;}", 9, "", "z=2;")
    text = "void f(){a=1;}"
    assert token_texts(text[:at] + ins + text[at:]) == token_texts("void f(){z=2;a=1;}")


def test_isp_round_trip_and_no_redeclaration():
    corpus = parsed([toy_function(k) for k in range(60)])
    samples = pd.gen_isp(corpus, 5)
    for s in samples:
        host = corpus[s.meta["index"]][1]
        assert pd.remove_inserted(s) == host.text
        assert s.meta["donor"] != s.meta["index"]
        parse_function(s.meta["text"])
        donor = parse_function("void g(){" + s.label + "}").statements()[0]
        assert not (pd._declared_names(donor) & pd._host_names(host))


def test_isp_needs_two_functions():
    with pytest.raises(pd.NoViableDonor):
        pd.gen_isp(parsed([toy_function(1)]), 0)


IF_ELSE_FOR = """\
int f(int c, int n)
{
    int s = 0;
    if (c) {
        s = 1;
    } else {
        s = 2;
    }
    for (i = 0; i < n; i++) {
        s += i;
    }
    return s;
}
"""


def test_if_reverse_rule():
    v = [x for x in pd.augment(unit(IF_ELSE_FOR), 12) if [t for t, _ in x.transforms] == [pd.IF_REVERSE]][0]
    want = token_texts("if (!(c)) { s = 2; } else { s = 1; }")
    toks = token_texts(v.variant_text)
    assert toks[toks.index("if"):][:len(want)] == want


def test_for_to_while_rule():
    v = [x for x in pd.augment(unit(IF_ELSE_FOR), 12) if [t for t, _ in x.transforms] == [pd.FOR_TO_WHILE]][0]
    toks = token_texts(v.variant_text)
    want = token_texts("i = 0; while (i < n) { s += i; i++; }")
    start = toks.index("while") - 4
    assert toks[start:start + len(want)] == want


def test_continue_blocks_for_to_while():
    text = "int f(int n)\n{\n    for (i = 0; i < n; i++) {\n        continue;\n    }\n    return 0;\n}\n"
    assert all(pd.FOR_TO_WHILE not in [t for t, _ in v.transforms] for v in pd.augment(unit(text), 6))


def _applicable(text, line):
    """Enumeration oracle: which single transforms apply."""
    out = []
    for name in pd.TRANSFORMS:
        ast = parse_function(text)
        if pd._TRANSFORM_FNS[name](ast, pd.label_span(ast, line), pd.sample_rng(0, 0)) is not None:
            out.append(name)
    return out


def test_variant_count_matches_subset_enumeration():
    applicable = _applicable(IF_ELSE_FOR, 12)
    assert len(applicable) == 3
    variants = pd.augment(unit(IF_ELSE_FOR), 12)
    assert len(variants) == 2 ** len(applicable) - 1
    assert {tuple(t for t, _ in v.transforms) for v in variants} == {
        ("IfReverse",), ("ForToWhile",), ("JunkInsert",), ("IfReverse", "ForToWhile"),
        ("IfReverse", "JunkInsert"), ("ForToWhile", "JunkInsert"), ("IfReverse", "ForToWhile", "JunkInsert")}


@given(st.integers(0, 5000), st.integers(0, 100))
def test_augment_preserves_label(fseed, seed):
    text = toy_function(fseed)
    ast = parse_function(text)
    stmt = ast.statements()[int(np.random.default_rng(fseed).integers(len(ast.statements())))]
    # the label is the outermost statement starting on that line: first in pre-order
    label_text = ast.source(next(s for s in ast.statements() if s.line == stmt.line))
    variants = pd.augment(unit(text), stmt.line, seed)
    assert [v.variant_text for v in pd.augment(unit(text), stmt.line, seed)] == [v.variant_text for v in variants]
    for v in variants:
        parse_function(v.variant_text)
        assert v.variant_text[v.label_span[0]:v.label_span[1]] == label_text
        assert v.label_lines[0] == v.variant_text.count("\n", 0, v.label_span[0]) + 1


def test_junk_bank_size():
    assert len(pd.JUNK_TEMPLATES) == 25


def test_write_samples(tmp_path):
    inp = model_input(toy_function(2))
    n = pd.write_samples([pd.gen_it(inp), pd.gen_msp(inp, 1)], tmp_path / "s.jsonl")
    assert n == 2
    import json
    rows = [json.loads(x) for x in (tmp_path / "s.jsonl").read_text().splitlines()]
    assert rows[1]["objective"] == "MSP" and rows[1]["seed"] == 1 and SEP in rows[1]["input"]
