"""Surface-overlap translation metrics.

Character-level metrics (chrF, Levenshtein, character length delta) serve
molecule outputs; whitespace-token metrics (BLEU, ROUGE, token length delta)
serve caption outputs. All functions take plain strings; none of them
normalize, lowercase, or strip — callers compare exactly what was produced.

References must be non-empty; predictions may be empty and score zero (or the
full length penalty) rather than raising.
"""

from __future__ import annotations

import math
from collections import Counter

from .errors import ContractError

__all__ = [
    "delta_len_chars", "delta_len_tokens",
    "char_ngrams", "token_ngrams",
    "chrf", "levenshtein", "bleu", "rouge_n", "rouge_l",
]


def _check_ref(ref: str) -> None:
    if not ref:
        raise ContractError("reference must be non-empty")


def delta_len_chars(pred: str, ref: str) -> int:
    """Signed character-length difference, prediction minus reference."""
    _check_ref(ref)
    return len(pred) - len(ref)


def delta_len_tokens(pred: str, ref: str) -> int:
    """Signed whitespace-token-count difference, prediction minus reference."""
    _check_ref(ref)
    return len(pred.split()) - len(ref.split())


def char_ngrams(s: str, n: int) -> Counter:
    """Multiset of character n-grams of ``s``."""
    if n < 1:
        raise ContractError("n-gram order must be >= 1")
    return Counter(s[i:i + n] for i in range(len(s) - n + 1))


def token_ngrams(tokens: list[str], n: int) -> Counter:
    if n < 1:
        raise ContractError("n-gram order must be >= 1")
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _f1(matches: int, pred_total: int, ref_total: int) -> float:
    precision = matches / pred_total if pred_total else 0.0
    recall = matches / ref_total if ref_total else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def chrf(pred: str, ref: str, max_order: int = 3) -> float:
    """Character n-gram F1 averaged over orders 1..max_order.

    Matches are clipped (min of the two counts per n-gram). Orders longer
    than the reference are skipped, so short references are not penalized for
    n-grams they cannot contain. Result lies in [0, 1]; identical strings
    score 1.0 and disjoint strings score 0.0.
    """
    _check_ref(ref)
    if max_order < 1:
        raise ContractError("max_order must be >= 1")
    scores = []
    for n in range(1, max_order + 1):
        ref_counts = char_ngrams(ref, n)
        ref_total = sum(ref_counts.values())
        if ref_total == 0:
            continue
        pred_counts = char_ngrams(pred, n)
        matches = sum(min(c, ref_counts[g]) for g, c in pred_counts.items())
        scores.append(_f1(matches, sum(pred_counts.values()), ref_total))
    return sum(scores) / len(scores)


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(
                prev[j] + 1,        # delete from a
                cur[j - 1] + 1,     # insert into a
                prev[j - 1] + (ca != cb),
            ))
        prev = cur
    return prev[-1]


def bleu(pred: str, ref: str, max_order: int = 4) -> float:
    """Whitespace-token BLEU with no smoothing.

    Geometric mean of clipped n-gram precisions for orders 1..max_order,
    times the brevity penalty exp(1 - |ref|/|pred|) applied only when the
    prediction is shorter. Any zero precision (including predictions shorter
    than max_order tokens) sends the score to exactly 0.0.
    """
    _check_ref(ref)
    if max_order < 1:
        raise ContractError("max_order must be >= 1")
    pred_tokens, ref_tokens = pred.split(), ref.split()
    if not pred_tokens:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_order + 1):
        pred_counts = token_ngrams(pred_tokens, n)
        total = sum(pred_counts.values())
        if total == 0:
            return 0.0
        ref_counts = token_ngrams(ref_tokens, n)
        matches = sum(min(c, ref_counts[g]) for g, c in pred_counts.items())
        if matches == 0:
            return 0.0
        log_sum += math.log(matches / total)
    precision_mean = math.exp(log_sum / max_order)
    if len(pred_tokens) < len(ref_tokens):
        bp = math.exp(1.0 - len(ref_tokens) / len(pred_tokens))
    else:
        bp = 1.0
    return bp * precision_mean


def rouge_n(pred: str, ref: str, n: int) -> float:
    """Token n-gram F1 with clipped matches."""
    _check_ref(ref)
    pred_counts = token_ngrams(pred.split(), n)
    ref_counts = token_ngrams(ref.split(), n)
    matches = sum(min(c, ref_counts[g]) for g, c in pred_counts.items())
    return _f1(matches, sum(pred_counts.values()), sum(ref_counts.values()))


def _lcs_len(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0]
        for j, cb in enumerate(b, start=1):
            if ca == cb:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(pred: str, ref: str) -> float:
    """Longest-common-subsequence F1 over whitespace tokens."""
    _check_ref(ref)
    pred_tokens, ref_tokens = pred.split(), ref.split()
    lcs = _lcs_len(pred_tokens, ref_tokens)
    return _f1(lcs, len(pred_tokens), len(ref_tokens))
