"""Unit tests for the surface metrics, pinned values plus oracle agreement."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molpo import textmetrics as tm
from molpo.errors import ContractError

from oracles import (
    bleu_oracle,
    chrf_oracle,
    levenshtein_oracle,
    rouge_l_oracle,
    rouge_n_oracle,
)


def test_empty_reference_rejected_everywhere():
    for fn in (
        lambda: tm.chrf("a", ""),
        lambda: tm.bleu("a", ""),
        lambda: tm.rouge_n("a", "", 1),
        lambda: tm.rouge_l("a", ""),
        lambda: tm.delta_len_chars("a", ""),
        lambda: tm.delta_len_tokens("a", ""),
    ):
        with pytest.raises(ContractError):
            fn()


def test_delta_len_signs():
    assert tm.delta_len_chars("CCO", "C") == 2
    assert tm.delta_len_chars("C", "CCO") == -2
    assert tm.delta_len_tokens("a b", "a b c d") == -2
    assert tm.delta_len_tokens("a  b", "a b") == 0  # runs of whitespace collapse


def test_chrf_pinned_hand_value():
    # orders: 1-gram F1 = 2/3, 2-gram F1 = 1/2, 3-gram F1 = 0 -> mean 7/18
    assert tm.chrf("CCO", "CCN") == pytest.approx(7.0 / 18.0, abs=1e-12)


def test_chrf_identity_and_disjoint():
    assert tm.chrf("CCO", "CCO") == 1.0
    assert tm.chrf("xyz", "CCO") == 0.0
    assert tm.chrf("", "CCO") == 0.0


def test_chrf_short_reference_skips_long_orders():
    # reference has only a 1-gram; orders 2 and 3 must not drag the mean down
    assert tm.chrf("C", "C") == 1.0


def test_levenshtein_pinned_values():
    assert tm.levenshtein("kitten", "sitting") == 3
    assert tm.levenshtein("", "abc") == 3
    assert tm.levenshtein("abc", "") == 3
    assert tm.levenshtein("same", "same") == 0
    assert tm.levenshtein("CCO", "CCN") == 1


def test_bleu_identity_and_brevity():
    assert tm.bleu("the cat sat", "the cat sat", max_order=2) == pytest.approx(1.0)
    # prediction is a 2-token prefix of a 3-token reference
    expected = math.exp(1.0 - 3.0 / 2.0)
    assert tm.bleu("the cat", "the cat sat", max_order=2) == pytest.approx(expected, abs=1e-12)


def test_bleu_no_smoothing_zeroes():
    assert tm.bleu("a b c", "x y z", max_order=2) == 0.0
    # three tokens cannot contain a 4-gram: exact zero, not a smoothed value
    assert tm.bleu("a b c", "a b c", max_order=4) == 0.0
    assert tm.bleu("", "a b", max_order=2) == 0.0


def test_bleu_longer_prediction_has_no_brevity_penalty():
    score = tm.bleu("the cat sat down", "the cat sat", max_order=1)
    assert score == pytest.approx(3.0 / 4.0)


def test_rouge_pinned_values():
    assert tm.rouge_n("the cat sat", "the cat", 1) == pytest.approx(0.8)
    assert tm.rouge_l("the cat sat", "the cat") == pytest.approx(0.8)
    assert tm.rouge_n("a b", "c d", 1) == 0.0
    assert tm.rouge_n("the cat sat", "the cat sat", 2) == 1.0
    # LCS sees order: scrambled tokens share unigrams but lose sequence credit
    assert tm.rouge_l("sat cat the", "the cat sat") < tm.rouge_n("sat cat the", "the cat sat", 1)


def test_all_scores_bounded():
    cases = [("abc", "abd"), ("a b c", "a c b"), ("", "ref"), ("xyz xyz", "xyz")]
    for pred, ref in cases:
        for val in (
            tm.chrf(pred, ref),
            tm.bleu(pred, ref, 2),
            tm.rouge_n(pred, ref, 1),
            tm.rouge_l(pred, ref),
        ):
            assert 0.0 <= val <= 1.0, (pred, ref, val)


_WORDS = st.lists(st.sampled_from(["cat", "sat", "mat", "the", "a"]), min_size=0, max_size=8)


@settings(max_examples=60, deadline=None)
@given(st.text(alphabet="CNO()=1", max_size=14), st.text(alphabet="CNO()=1", min_size=1, max_size=14))
def test_char_metrics_match_oracles(pred, ref):
    assert tm.chrf(pred, ref) == pytest.approx(chrf_oracle(pred, ref), abs=1e-12)
    assert tm.levenshtein(pred, ref) == levenshtein_oracle(pred, ref)


@settings(max_examples=60, deadline=None)
@given(_WORDS, st.lists(st.sampled_from(["cat", "sat", "mat", "the", "a"]), min_size=1, max_size=8))
def test_token_metrics_match_oracles(pred_words, ref_words):
    pred, ref = " ".join(pred_words), " ".join(ref_words)
    if not ref:
        return
    assert tm.bleu(pred, ref, 2) == pytest.approx(bleu_oracle(pred, ref, 2), abs=1e-12)
    assert tm.bleu(pred, ref, 4) == pytest.approx(bleu_oracle(pred, ref, 4), abs=1e-12)
    assert tm.rouge_n(pred, ref, 1) == pytest.approx(rouge_n_oracle(pred, ref, 1), abs=1e-12)
    assert tm.rouge_n(pred, ref, 2) == pytest.approx(rouge_n_oracle(pred, ref, 2), abs=1e-12)
    assert tm.rouge_l(pred, ref) == pytest.approx(rouge_l_oracle(pred, ref), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.text(alphabet="abcd", max_size=12), st.text(alphabet="abcd", max_size=12))
def test_levenshtein_symmetry_property(a, b):
    assert tm.levenshtein(a, b) == tm.levenshtein(b, a)
    assert tm.levenshtein(a, b) <= max(len(a), len(b))
    if a == b:
        assert tm.levenshtein(a, b) == 0
