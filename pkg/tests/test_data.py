"""Tests for dataset records, instruction rendering, and the toy corpus."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molpo import chem, data
from molpo.errors import ContractError, DataError


# ---------------------------------------------------------------- templates

def test_prompt_ends_at_marker_both_directions():
    for direction in data.DIRECTIONS:
        prompt = data.render_prompt(direction, "CCO")
        assert prompt.endswith(data.RESPONSE_MARKER)
        assert prompt.count(data.RESPONSE_MARKER) == 1


def test_mol2lang_prompt_layout_verbatim():
    prompt = data.render_prompt("mol2lang", "CCO")
    expected = (
        "Below is an instruction that describes a task, paired with an input "
        "that provides further context.\n"
        "Write a response that appropriately completes the request.\n"
        "\n"
        "### Instruction: You are a researcher. You can come up captions based "
        "on your existing knowledge.\n"
        "Captions are given against the following input. You should be as "
        "detailed as possible.\n"
        "\n"
        "### Input: Molecule: CCO\n"
        "In that molecule, could you formulate a caption about?\n"
        "\n"
        "\n"
        "### Response:"
    )
    assert prompt == expected


def test_lang2mol_prompt_mentions_caption_input():
    prompt = data.render_prompt("lang2mol", "a chain of 2 carbons")
    assert "### Input: Caption: a chain of 2 carbons\n" in prompt
    assert "molecule smile string" in prompt


def test_target_separator_differs_by_direction():
    full_cap = data.render_instruction(data.template_for("mol2lang"), "CCO", "an alcohol")
    assert full_cap.endswith("### Response:an alcohol")
    full_mol = data.render_instruction(data.template_for("lang2mol"), "an alcohol", "CCO")
    assert full_mol.endswith("### Response: CCO")


def test_render_example_splits_at_marker():
    for direction, source, target in (("mol2lang", "CCO", "a caption"),
                                      ("lang2mol", "a caption", "CCO")):
        prompt, completion = data.render_example(direction, source, target)
        assert prompt + completion == data.render_instruction(
            data.template_for(direction), source, target)
        assert prompt.endswith(data.RESPONSE_MARKER)
        assert completion.lstrip(" ") == target


def test_marker_in_source_rejected():
    with pytest.raises(DataError):
        data.render_prompt("mol2lang", "CCO ### Response: CCN")


def test_empty_source_rejected():
    with pytest.raises(ContractError):
        data.render_prompt("mol2lang", "")


# ---------------------------------------------------------------- records

def test_pair_rejects_bad_direction_and_empty_fields():
    with pytest.raises(DataError):
        data.LMPair(id="a", direction="sideways", source="s", target="t")
    with pytest.raises(DataError):
        data.LMPair(id="a", direction="mol2lang", source="", target="t")
    with pytest.raises(DataError):
        data.LMPair(id="a", direction="mol2lang", source="s", target="")


def test_molecule_pair_target_must_tokenize():
    with pytest.raises(DataError):
        data.LMPair(id="a", direction="lang2mol", source="a caption", target="Cx")
    # parse-invalid but tokenizable targets are fine at the record level
    data.LMPair(id="b", direction="lang2mol", source="a caption", target="C(")


def test_triple_degenerate_flag():
    t = data.PreferenceTriple(id="a", direction="mol2lang", source="CCO",
                              preferred="same", dispreferred="same")
    assert t.is_degenerate
    t2 = data.PreferenceTriple(id="a", direction="mol2lang", source="CCO",
                               preferred="x", dispreferred="y")
    assert not t2.is_degenerate


def test_kto_example_label_validation():
    with pytest.raises(DataError):
        data.KtoExample(id="a", direction="mol2lang", source="s", output="o",
                        label="good")


# ---------------------------------------------------------------- toy corpus

def test_catalog_size_and_bijection():
    catalog = data.toy_catalog()
    # 4 families x (10 linear chains + 36 branch placements)
    assert len(catalog) == 184
    captions = [c for c, _ in catalog]
    molecules = [m for _, m in catalog]
    assert len(set(captions)) == 184
    assert len(set(molecules)) == 184


def test_catalog_molecules_all_validate():
    for _, smiles in data.toy_catalog():
        graph = chem.mol_from_smiles(smiles)
        assert chem.validate_molecule(graph) == []


def test_catalog_contains_known_entry():
    assert ("a chain of 2 carbons bearing one hydroxyl group", "CCO") in data.toy_catalog()


def test_catalog_branch_entry_shape():
    catalog = dict(data.toy_catalog())
    smiles = catalog["a chain of 4 carbons carrying a methyl branch on carbon 2"
                     " bearing one hydroxyl group"]
    assert smiles == "CC(C)CCO"


def test_gen_toy_corpus_deterministic_and_alternating():
    a = data.gen_toy_corpus(20, seed=7)
    b = data.gen_toy_corpus(20, seed=7)
    assert a == b
    assert data.gen_toy_corpus(20, seed=8) != a
    assert [p.direction for p in a[:4]] == ["lang2mol", "mol2lang"] * 2
    assert len({p.id for p in a}) == 20


def test_gen_toy_corpus_rejects_empty():
    with pytest.raises(ContractError):
        data.gen_toy_corpus(0, seed=1)


# ---------------------------------------------------------------- corruption

def test_corrupt_target_contract():
    out = data.corrupt_target("CCO", "lang2mol", strength=0.1, seed=3)
    assert out != "CCO" and out
    chem.tokenize_smiles(out)  # must stay tokenizable
    assert out == data.corrupt_target("CCO", "lang2mol", strength=0.1, seed=3)


def test_corrupt_caption_edits_words():
    caption = "a chain of 3 carbons bearing one amino group"
    out = data.corrupt_target(caption, "mol2lang", strength=0.3, seed=5)
    assert out != caption and out
    assert out == data.corrupt_target(caption, "mol2lang", strength=0.3, seed=5)


def test_corrupt_strength_bounds():
    with pytest.raises(ContractError):
        data.corrupt_target("CCO", "lang2mol", strength=0.0, seed=1)
    with pytest.raises(ContractError):
        data.corrupt_target("CCO", "lang2mol", strength=1.5, seed=1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 183), st.integers(0, 2**31 - 1), st.floats(0.05, 1.0))
def test_corrupt_molecules_always_tokenize(index, seed, strength):
    _, smiles = data.toy_catalog()[index]
    out = data.corrupt_target(smiles, "lang2mol", strength, seed)
    assert out and out != smiles
    chem.tokenize_smiles(out)


# ---------------------------------------------------------------- triples

def test_build_triples_prefers_gold():
    pairs = data.gen_toy_corpus(10, seed=1)
    triples = data.build_triples(pairs, data.corruption_generator(0.2), seed=9)
    assert len(triples) == 10
    assert [t.id for t in triples] == [p.id for p in pairs]
    for t, p in zip(triples, pairs):
        assert t.preferred == p.target
        assert t.dispreferred != t.preferred
    assert triples == data.build_triples(pairs, data.corruption_generator(0.2), seed=9)


def test_build_triples_identity_generator_degenerate():
    pairs = data.gen_toy_corpus(4, seed=1)
    triples = data.build_triples(pairs, lambda pair, seed: pair.target, seed=0)
    assert len(triples) == 4
    assert all(t.is_degenerate for t in triples)


def test_build_triples_skips_failing_pairs():
    pairs = data.gen_toy_corpus(6, seed=1)
    bad_id = pairs[2].id

    def generator(pair, seed):
        if pair.id == bad_id:
            raise RuntimeError("boom")
        return data.corrupt_target(pair.target, pair.direction, 0.2, seed)

    triples = data.build_triples(pairs, generator, seed=4)
    assert len(triples) == 5
    assert bad_id not in {t.id for t in triples}
    # pairs after the failure keep their outputs (per-pair seeds pre-drawn)
    full = data.build_triples(pairs, data.corruption_generator(0.2), seed=4)
    assert {t.id: t.dispreferred for t in triples} == {
        t.id: t.dispreferred for t in full if t.id != bad_id}


def test_triples_to_kto_shapes():
    pairs = data.gen_toy_corpus(3, seed=1)
    triples = data.build_triples(pairs, data.corruption_generator(0.2), seed=2)
    examples = data.triples_to_kto(triples)
    assert len(examples) == 6
    assert examples[0].id.endswith("#preferred")
    assert examples[1].id.endswith("#dispreferred")
    assert examples[0].output == triples[0].preferred
    assert examples[1].output == triples[0].dispreferred
    labels = [e.label for e in examples]
    assert labels.count("preferred") == 3 and labels.count("dispreferred") == 3
    assert data.triples_to_kto([]) == []


# ---------------------------------------------------------------- splitting

def test_split_exact_fractions():
    pairs = data.gen_toy_corpus(100, seed=2)
    train, val, test = data.split_dataset(pairs, (0.8, 0.1, 0.1), seed=3)
    assert (len(train), len(val), len(test)) == (80, 10, 10)
    ids = {p.id for p in train} | {p.id for p in val} | {p.id for p in test}
    assert ids == {p.id for p in pairs}
    again = data.split_dataset(pairs, (0.8, 0.1, 0.1), seed=3)
    assert tuple(map(tuple, again)) == (tuple(train), tuple(val), tuple(test))


def test_split_remainder_goes_to_largest_fraction():
    pairs = data.gen_toy_corpus(7, seed=2)
    a, b = data.split_dataset(pairs, (0.5, 0.5), seed=1)
    assert sorted((len(a), len(b))) == [3, 4]
    assert len(a) == 4  # tie broken toward the earlier fraction


def test_split_validates_fractions():
    pairs = data.gen_toy_corpus(4, seed=2)
    with pytest.raises(ContractError):
        data.split_dataset(pairs, (0.5, 0.4), seed=1)
    with pytest.raises(ContractError):
        data.split_dataset(pairs, (1.2, -0.2), seed=1)


# ---------------------------------------------------------------- JSONL

def test_jsonl_roundtrip_all_types(tmp_path):
    pairs = data.gen_toy_corpus(6, seed=5)
    triples = data.build_triples(pairs, data.corruption_generator(0.2), seed=6)
    examples = data.triples_to_kto(triples)

    p, t, k = tmp_path / "p.jsonl", tmp_path / "t.jsonl", tmp_path / "k.jsonl"
    data.write_pairs(p, pairs)
    data.write_triples(t, triples)
    data.write_kto(k, examples)
    assert data.read_pairs(p) == pairs
    assert data.read_triples(t) == triples
    assert data.read_kto(k) == examples


def test_jsonl_rejects_unknown_and_missing_fields(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = {"id": "a", "direction": "mol2lang", "source": "CCO", "target": "x"}
    path.write_text(json.dumps({**good, "extra": "1"}) + "\n")
    with pytest.raises(DataError, match="extra"):
        data.read_pairs(path)
    missing = {k: v for k, v in good.items() if k != "target"}
    path.write_text(json.dumps(missing) + "\n")
    with pytest.raises(DataError, match="missing"):
        data.read_pairs(path)


def test_jsonl_rejects_non_string_fields(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": 3, "direction": "mol2lang", "source": "C", "target": "x"}\n')
    with pytest.raises(DataError, match="non-string"):
        data.read_pairs(path)


def test_jsonl_rejects_malformed_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("{not json}\n")
    with pytest.raises(DataError, match="invalid JSON"):
        data.read_pairs(path)
