"""Per-pair translation scoring and aggregate reports.

A PairRecord holds one model output next to its reference; evaluation
populates exactly the direction-appropriate metrics:

* ``lang2mol`` (molecule outputs): character length delta, chrF, edit
  distance, validity, fingerprint similarity, and the molecule win flag —
  chrF > 0.3 AND |ΔLen| < 5 characters AND the prediction is a valid
  molecule.
* ``mol2lang`` (caption outputs): token length delta, BLEU-2/4, ROUGE-1/2/L,
  and an entailment verdict. The caption win flag requires the entail
  probability to be the strict argmax; records without a usable scorer are
  counted as non-wins and excluded from entailment aggregates.

Aggregation uses fixed histogram shapes so reports from different runs line
up row-for-row: length deltas get width-1 bins over [-50, 50], edit
distances width-1 bins over [0, 100], and score-valued metrics 20 bins over
[0, 1]; every histogram carries explicit underflow/overflow rows.
"""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import chem, textmetrics
from .errors import ContractError, DataError, ScorerError
from .nli import NliScorer, NliVerdict

__all__ = [
    "DIRECTIONS", "LANG2MOL", "MOL2LANG",
    "PairRecord", "MetricRecord",
    "mol_win", "lang_win",
    "evaluate_pair", "evaluate_records",
    "Histogram", "MetricSummary", "MetricReport", "aggregate_report",
    "write_metric_records", "read_metric_records", "write_histogram_csv",
]

logger = logging.getLogger(__name__)

LANG2MOL = "lang2mol"
MOL2LANG = "mol2lang"
DIRECTIONS = (LANG2MOL, MOL2LANG)

CHRF_WIN_THRESHOLD = 0.3
DELTA_LEN_WIN_LIMIT = 5


def _check_direction(direction: str) -> None:
    if direction not in DIRECTIONS:
        raise ContractError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


@dataclass(frozen=True)
class PairRecord:
    """One prediction aligned with its reference."""

    id: str
    direction: str
    prediction: str
    reference: str
    source: str = ""

    def __post_init__(self):
        _check_direction(self.direction)
        if not self.reference:
            raise ContractError(f"record {self.id!r} has an empty reference")


@dataclass
class MetricRecord:
    """Direction-appropriate metrics for one pair; unused fields stay None."""

    id: str
    direction: str
    win: bool
    delta_len: int
    # molecule outputs
    chrf: Optional[float] = None
    levenshtein: Optional[int] = None
    valid: Optional[bool] = None
    tanimoto: Optional[float] = None
    # caption outputs
    bleu2: Optional[float] = None
    bleu4: Optional[float] = None
    rouge1: Optional[float] = None
    rouge2: Optional[float] = None
    rouge_l: Optional[float] = None
    entail: Optional[float] = None
    neutral: Optional[float] = None
    contradict: Optional[float] = None
    nli_evaluated: Optional[bool] = None

    def to_json_dict(self) -> dict:
        out = {"id": self.id, "direction": self.direction, "win": self.win,
               "delta_len": self.delta_len}
        for name in ("chrf", "levenshtein", "valid", "tanimoto", "bleu2", "bleu4",
                     "rouge1", "rouge2", "rouge_l", "entail", "neutral",
                     "contradict", "nli_evaluated"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MetricRecord":
        try:
            return cls(**obj)
        except TypeError as exc:
            raise DataError(f"malformed metric record {obj!r}: {exc}") from exc


def mol_win(chrf_score: float, delta_chars: int, valid: bool) -> bool:
    """Molecule-side win: close surface match, near-equal length, valid output."""
    return chrf_score > CHRF_WIN_THRESHOLD and abs(delta_chars) < DELTA_LEN_WIN_LIMIT and valid


def lang_win(verdict: Optional[NliVerdict]) -> bool:
    """Caption-side win: entailment is the strict argmax (ties lose)."""
    if verdict is None:
        return False
    return verdict.entail > verdict.neutral and verdict.entail > verdict.contradict


def _evaluate_lang2mol(record: PairRecord) -> MetricRecord:
    try:
        ref_graph = chem.mol_from_smiles(record.reference)
    except chem.SmilesError as exc:
        raise ContractError(f"record {record.id!r}: reference is not a "
                            f"parseable molecule: {exc}") from exc
    if chem.validate_molecule(ref_graph):
        raise ContractError(f"record {record.id!r}: reference molecule fails valence checks")
    delta = textmetrics.delta_len_chars(record.prediction, record.reference)
    chrf_score = textmetrics.chrf(record.prediction, record.reference)
    edit = textmetrics.levenshtein(record.prediction, record.reference)
    valid = chem.is_valid_smiles(record.prediction)
    if valid:
        sim = chem.tanimoto(
            chem.morgan_fingerprint(chem.mol_from_smiles(record.prediction)),
            chem.morgan_fingerprint(ref_graph),
        )
    else:
        sim = 0.0
    return MetricRecord(
        id=record.id, direction=LANG2MOL,
        win=mol_win(chrf_score, delta, valid),
        delta_len=delta, chrf=chrf_score, levenshtein=edit,
        valid=valid, tanimoto=sim,
    )


def _evaluate_mol2lang(record: PairRecord, verdict: Optional[NliVerdict]) -> MetricRecord:
    delta = textmetrics.delta_len_tokens(record.prediction, record.reference)
    rec = MetricRecord(
        id=record.id, direction=MOL2LANG,
        win=lang_win(verdict),
        delta_len=delta,
        bleu2=textmetrics.bleu(record.prediction, record.reference, 2),
        bleu4=textmetrics.bleu(record.prediction, record.reference, 4),
        rouge1=textmetrics.rouge_n(record.prediction, record.reference, 1),
        rouge2=textmetrics.rouge_n(record.prediction, record.reference, 2),
        rouge_l=textmetrics.rouge_l(record.prediction, record.reference),
        nli_evaluated=verdict is not None,
    )
    if verdict is not None:
        rec.entail = verdict.entail
        rec.neutral = verdict.neutral
        rec.contradict = verdict.contradict
    return rec


def evaluate_pair(record: PairRecord, scorer: Optional[NliScorer] = None) -> MetricRecord:
    """Score one record; for captions the scorer may be omitted (no win possible)."""
    if record.direction == LANG2MOL:
        return _evaluate_lang2mol(record)
    verdict = None
    if scorer is not None:
        from .nli import nli_score
        verdict = nli_score(record.reference, record.prediction, scorer)
    return _evaluate_mol2lang(record, verdict)


def evaluate_records(
    records: Sequence[PairRecord], scorer: Optional[NliScorer] = None
) -> list[MetricRecord]:
    """Score many records; caption entailment is batched through the scorer.

    The reference caption is the premise and the prediction the hypothesis.
    If the scorer fails for the batch, the affected records are marked
    unevaluated (never wins) rather than aborting the whole evaluation.
    """
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise DataError("record ids must be unique")
    verdicts: dict[str, NliVerdict] = {}
    caption_records = [r for r in records if r.direction == MOL2LANG]
    if scorer is not None and caption_records:
        items = [(r.id, r.reference, r.prediction) for r in caption_records]
        try:
            verdicts = scorer.score_pairs(items)
        except ScorerError as exc:
            logger.warning("entailment scorer failed; %d caption record(s) left "
                           "unevaluated: %s", len(caption_records), exc)
            verdicts = {}
    out = []
    for record in records:
        if record.direction == LANG2MOL:
            out.append(_evaluate_lang2mol(record))
        else:
            out.append(_evaluate_mol2lang(record, verdicts.get(record.id)))
    return out


@dataclass(frozen=True)
class Histogram:
    """Fixed-shape histogram with explicit underflow/overflow rows."""

    lo: float
    hi: float
    nbins: int
    counts: tuple[int, ...]
    underflow: int
    overflow: int

    @classmethod
    def build(cls, values: Sequence[float], lo: float, hi: float, nbins: int) -> "Histogram":
        width = (hi - lo) / nbins
        counts = [0] * nbins
        under = over = 0
        for v in values:
            if v < lo:
                under += 1
            elif v > hi:
                over += 1
            else:
                idx = min(int((v - lo) / width), nbins - 1)  # hi lands in the last bin
                counts[idx] += 1
        return cls(lo=lo, hi=hi, nbins=nbins, counts=tuple(counts),
                   underflow=under, overflow=over)

    def edges(self) -> list[float]:
        width = (self.hi - self.lo) / self.nbins
        return [self.lo + i * width for i in range(self.nbins + 1)]

    def rows(self) -> list[tuple[str, str, int]]:
        """CSV rows: one per bin plus underflow and overflow, in axis order."""
        edges = self.edges()
        out = [("-inf", repr(self.lo), self.underflow)]
        for i in range(self.nbins):
            out.append((repr(edges[i]), repr(edges[i + 1]), self.counts[i]))
        out.append((repr(self.hi), "inf", self.overflow))
        return out

    def to_json_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "nbins": self.nbins,
                "counts": list(self.counts), "underflow": self.underflow,
                "overflow": self.overflow}


def _delta_len_histogram(values: Sequence[float]) -> Histogram:
    return Histogram.build(values, lo=-50.5, hi=50.5, nbins=101)


def _edit_histogram(values: Sequence[float]) -> Histogram:
    return Histogram.build(values, lo=-0.5, hi=100.5, nbins=101)


def _score_histogram(values: Sequence[float]) -> Histogram:
    return Histogram.build(values, lo=0.0, hi=1.0, nbins=20)


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    median: float
    histogram: Histogram

    @classmethod
    def build(cls, values: Sequence[float], histogram: Histogram) -> "MetricSummary":
        arr = np.asarray(values, dtype=np.float64)
        return cls(mean=float(arr.mean()), median=float(np.median(arr)), histogram=histogram)

    def to_json_dict(self) -> dict:
        return {"mean": self.mean, "median": self.median,
                "histogram": self.histogram.to_json_dict()}


@dataclass(frozen=True)
class MetricReport:
    """Aggregates for one direction; ``win_rate`` is wins over all records."""

    direction: str
    count: int
    wins: int
    win_rate: float
    rates: dict[str, float]
    metrics: dict[str, MetricSummary]
    nli_excluded: int = 0

    def to_json_dict(self) -> dict:
        return {
            "direction": self.direction,
            "count": self.count,
            "wins": self.wins,
            "win_rate": self.win_rate,
            "rates": dict(self.rates),
            "nli_excluded": self.nli_excluded,
            "metrics": {k: v.to_json_dict() for k, v in self.metrics.items()},
        }


_LANG2MOL_FIELDS = ("delta_len", "chrf", "levenshtein", "tanimoto")
_MOL2LANG_FIELDS = ("delta_len", "bleu2", "bleu4", "rouge1", "rouge2", "rouge_l")


def aggregate_report(records: Sequence[MetricRecord]) -> MetricReport:
    """Fold per-pair metrics into one direction's report.

    All records must share a direction. Caption records lacking an
    entailment verdict are excluded from the entail summary (their count is
    reported) but still appear in every other aggregate, including win_rate.
    """
    if not records:
        raise ContractError("cannot aggregate zero records")
    direction = records[0].direction
    if any(r.direction != direction for r in records):
        raise ContractError("all records in a report must share one direction")

    wins = sum(1 for r in records if r.win)
    count = len(records)
    metrics: dict[str, MetricSummary] = {}
    rates: dict[str, float] = {}

    def add(name: str, values: list[float], hist: Histogram) -> None:
        metrics[name] = MetricSummary.build(values, hist)

    if direction == LANG2MOL:
        for name in _LANG2MOL_FIELDS:
            values = [float(getattr(r, name)) for r in records]
            if name == "delta_len":
                add(name, values, _delta_len_histogram(values))
            elif name == "levenshtein":
                add(name, values, _edit_histogram(values))
            else:
                add(name, values, _score_histogram(values))
        rates["valid_rate"] = sum(1 for r in records if r.valid) / count
        excluded = 0
    else:
        for name in _MOL2LANG_FIELDS:
            values = [float(getattr(r, name)) for r in records]
            if name == "delta_len":
                add(name, values, _delta_len_histogram(values))
            else:
                add(name, values, _score_histogram(values))
        scored = [r for r in records if r.nli_evaluated]
        excluded = count - len(scored)
        if scored:
            values = [float(r.entail) for r in scored]
            add("entail", values, _score_histogram(values))
        rates["nli_coverage"] = len(scored) / count

    return MetricReport(
        direction=direction, count=count, wins=wins, win_rate=wins / count,
        rates=rates, metrics=metrics, nli_excluded=excluded,
    )


def write_metric_records(path, records: Sequence[MetricRecord]) -> None:
    """One JSON object per line, UTF-8, unpopulated fields omitted."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def read_metric_records(path) -> list[MetricRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            out.append(MetricRecord.from_json_dict(obj))
    return out


def write_histogram_csv(path, histogram: Histogram) -> None:
    """Delimited histogram: header plus nbins + 2 rows (underflow, bins, overflow)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, count in histogram.rows():
            writer.writerow([lo, hi, count])
