"""Tests for per-pair scoring, win criteria, and aggregate reports."""

import csv
import json

import pytest

from molpo import evaluation as ev
from molpo.errors import ContractError, DataError, ScorerError
from molpo.nli import LexicalOverlapScorer, NliVerdict


def _rec(id, direction, prediction, reference):
    return ev.PairRecord(id=id, direction=direction, prediction=prediction,
                         reference=reference)


# ---------------------------------------------------------------- records

def test_pair_record_rejects_unknown_direction():
    with pytest.raises(ContractError):
        _rec("a", "mol2mol", "C", "C")


def test_pair_record_rejects_empty_reference():
    with pytest.raises(ContractError):
        _rec("a", "lang2mol", "C", "")


# ---------------------------------------------------------------- win rules

def test_mol_win_requires_all_three_conditions():
    assert ev.mol_win(0.9, 0, True)
    assert not ev.mol_win(0.3, 0, True)      # threshold is strict
    assert not ev.mol_win(0.9, 5, True)      # length gate is strict
    assert not ev.mol_win(0.9, -5, True)
    assert ev.mol_win(0.31, 4, True)
    assert not ev.mol_win(0.9, 0, False)


def test_lang_win_strict_argmax():
    assert ev.lang_win(NliVerdict(0.5, 0.3, 0.2))
    assert not ev.lang_win(NliVerdict(0.4, 0.4, 0.2))   # tie loses
    assert not ev.lang_win(NliVerdict(0.2, 0.5, 0.3))
    assert not ev.lang_win(None)


# ---------------------------------------------------------------- molecule side

def test_exact_molecule_prediction_wins():
    rec = ev.evaluate_pair(_rec("m1", "lang2mol", "CCO", "CCO"))
    assert rec.win and rec.valid
    assert rec.delta_len == 0
    assert rec.chrf == pytest.approx(1.0)
    assert rec.levenshtein == 0
    assert rec.tanimoto == pytest.approx(1.0)
    assert rec.bleu2 is None and rec.entail is None


def test_invalid_molecule_prediction_scores_zero_similarity():
    rec = ev.evaluate_pair(_rec("m2", "lang2mol", "C(", "CCO"))
    assert not rec.valid
    assert rec.tanimoto == 0.0
    assert not rec.win


def test_near_molecule_metrics():
    rec = ev.evaluate_pair(_rec("m3", "lang2mol", "CCN", "CCO"))
    assert rec.valid
    assert rec.delta_len == 0
    assert rec.levenshtein == 1
    assert rec.chrf == pytest.approx(7.0 / 18.0)
    assert 0.0 < rec.tanimoto < 1.0
    assert rec.win  # chrF 0.389 > 0.3, |delta| 0 < 5, valid


def test_unparseable_reference_is_a_contract_error():
    with pytest.raises(ContractError):
        ev.evaluate_pair(_rec("m4", "lang2mol", "C", "C("))


# ---------------------------------------------------------------- caption side

def test_identical_caption_wins_under_lexical_scorer():
    rec = ev.evaluate_pair(
        _rec("c1", "mol2lang", "a chain of two carbons", "a chain of two carbons"),
        scorer=LexicalOverlapScorer(),
    )
    assert rec.win and rec.nli_evaluated
    assert rec.entail is not None and rec.entail > rec.neutral
    assert rec.delta_len == 0
    assert rec.bleu2 == pytest.approx(1.0)
    assert rec.rouge_l == pytest.approx(1.0)
    assert rec.chrf is None and rec.valid is None


def test_disjoint_caption_loses_under_lexical_scorer():
    rec = ev.evaluate_pair(
        _rec("c2", "mol2lang", "entirely unrelated words", "a chain of two carbons"),
        scorer=LexicalOverlapScorer(),
    )
    assert not rec.win
    assert rec.nli_evaluated


def test_caption_without_scorer_is_unevaluated_and_loses():
    rec = ev.evaluate_pair(
        _rec("c3", "mol2lang", "a chain of two carbons", "a chain of two carbons"))
    assert not rec.win
    assert rec.nli_evaluated is False
    assert rec.entail is None


# ---------------------------------------------------------------- batching

class _ExplodingScorer:
    def score_pairs(self, items):
        raise ScorerError("synthetic failure")


def test_evaluate_records_mixed_directions():
    records = [
        _rec("a", "lang2mol", "CCO", "CCO"),
        _rec("b", "mol2lang", "a chain of two carbons", "a chain of two carbons"),
    ]
    out = ev.evaluate_records(records, scorer=LexicalOverlapScorer())
    assert [r.id for r in out] == ["a", "b"]
    assert out[0].valid is True and out[0].entail is None
    assert out[1].nli_evaluated and out[1].win


def test_evaluate_records_scorer_failure_marks_unevaluated():
    records = [_rec("b", "mol2lang", "same words", "same words")]
    out = ev.evaluate_records(records, scorer=_ExplodingScorer())
    assert out[0].nli_evaluated is False and not out[0].win


def test_evaluate_records_duplicate_ids_rejected():
    records = [_rec("x", "lang2mol", "C", "C"), _rec("x", "lang2mol", "CC", "CC")]
    with pytest.raises(DataError):
        ev.evaluate_records(records)


def test_evaluate_records_empty_is_empty():
    assert ev.evaluate_records([]) == []


# ---------------------------------------------------------------- histograms

def test_histogram_centered_integer_bins():
    hist = ev._delta_len_histogram([-50, 0, 50, -51, 51])
    assert hist.nbins == 101
    assert hist.counts[0] == 1 and hist.counts[50] == 1 and hist.counts[100] == 1
    assert hist.underflow == 1 and hist.overflow == 1
    assert sum(hist.counts) == 3


def test_score_histogram_endpoints():
    hist = ev._score_histogram([0.0, 1.0, 0.999, 0.05])
    assert hist.nbins == 20
    assert hist.counts[0] == 1          # 0.0
    assert hist.counts[1] == 1          # 0.05 falls in [0.05, 0.10)
    assert hist.counts[19] == 2         # 1.0 and 0.999 share the last bin
    assert hist.underflow == 0 and hist.overflow == 0


def test_histogram_rows_cover_bins_plus_two():
    hist = ev._score_histogram([0.5])
    rows = hist.rows()
    assert len(rows) == hist.nbins + 2
    assert rows[0][0] == "-inf" and rows[-1][1] == "inf"
    assert sum(r[2] for r in rows) == 1


def test_edit_histogram_range():
    hist = ev._edit_histogram([0, 100, 101])
    assert hist.counts[0] == 1 and hist.counts[100] == 1
    assert hist.overflow == 1


# ---------------------------------------------------------------- aggregation

def _mol_records():
    pairs = [("a", "CCO", "CCO"), ("b", "CCN", "CCO"), ("c", "C(", "CCO")]
    return ev.evaluate_records([_rec(i, "lang2mol", p, r) for i, p, r in pairs])


def test_aggregate_molecule_report():
    report = ev.aggregate_report(_mol_records())
    assert report.direction == "lang2mol"
    assert report.count == 3
    assert report.wins == 2
    assert report.win_rate == pytest.approx(2 / 3)
    assert report.rates["valid_rate"] == pytest.approx(2 / 3)
    assert set(report.metrics) == {"delta_len", "chrf", "levenshtein", "tanimoto"}
    assert report.nli_excluded == 0


def test_aggregate_caption_report_counts_exclusions():
    records = [
        _rec("a", "mol2lang", "a chain of two carbons", "a chain of two carbons"),
        _rec("b", "mol2lang", "words apart", "a chain of two carbons"),
    ]
    scored = ev.evaluate_records(records, scorer=LexicalOverlapScorer())
    unscored = ev.evaluate_records([_rec("c", "mol2lang", "x", "a chain")])
    report = ev.aggregate_report(scored + unscored)
    assert report.count == 3
    assert report.nli_excluded == 1
    assert report.rates["nli_coverage"] == pytest.approx(2 / 3)
    # the entail summary covers only the scored records
    entail_hist = report.metrics["entail"].histogram
    assert sum(entail_hist.counts) == 2
    # the unevaluated record still counts in the win denominator
    assert report.win_rate == pytest.approx(report.wins / 3)


def test_aggregate_rejects_empty_and_mixed():
    with pytest.raises(ContractError):
        ev.aggregate_report([])
    mixed = _mol_records() + ev.evaluate_records(
        [_rec("z", "mol2lang", "w", "a chain")])
    with pytest.raises(ContractError):
        ev.aggregate_report(mixed)


# ---------------------------------------------------------------- serialization

def test_metric_records_roundtrip(tmp_path):
    records = _mol_records()
    path = tmp_path / "records.jsonl"
    ev.write_metric_records(path, records)
    back = ev.read_metric_records(path)
    assert back == records
    # unused caption fields are absent from the serialized form
    first = json.loads(path.read_text().splitlines()[0])
    assert "bleu2" not in first and "entail" not in first


def test_read_metric_records_rejects_bad_json(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a"\n')
    with pytest.raises(DataError):
        ev.read_metric_records(path)


def test_histogram_csv_shape(tmp_path):
    report = ev.aggregate_report(_mol_records())
    path = tmp_path / "hist_chrf.csv"
    ev.write_histogram_csv(path, report.metrics["chrf"].histogram)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["bin_lo", "bin_hi", "count"]
    assert len(rows) == 1 + 20 + 2
    assert sum(int(r[2]) for r in rows[1:]) == 3
    # bin edges parse back as floats except the two sentinel rows
    assert rows[1][0] == "-inf" and rows[-1][1] == "inf"
    assert float(rows[2][0]) == 0.0 and float(rows[-2][1]) == 1.0
