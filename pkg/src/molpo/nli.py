"""Entailment scoring against pluggable external backends.

Caption predictions are judged by natural-language inference: the reference
caption is the premise, the model's caption is the hypothesis, and a scorer
returns a probability triple (entail, neutral, contradict) summing to one.

The wire protocol is one JSON object per line. Requests carry
``{"id", "premise", "hypothesis"}``; responses carry
``{"id", "entail", "neutral", "contradict"}`` and may arrive in any order —
pairing is by id. Two transports speak it: a child process over
stdin/stdout, and an HTTP endpoint receiving one request object per POST.
Both enforce a per-batch timeout (default 30 s) and raise ScorerError on any
protocol violation. A deterministic lexical-overlap baseline provides a
dependency-free local scorer for tests and toy experiments.
"""

from __future__ import annotations

import json
import subprocess
import time
import urllib.error
import urllib.request
from collections.abc import Sequence
from dataclasses import dataclass

from .errors import ContractError, ScorerError

__all__ = [
    "NliVerdict", "ScoreRequest",
    "NliScorer", "SubprocessScorer", "HttpScorer", "LexicalOverlapScorer",
    "nli_score",
]

DEFAULT_TIMEOUT = 30.0


@dataclass(frozen=True)
class NliVerdict:
    """Probability triple over entailment classes; must sum to one."""

    entail: float
    neutral: float
    contradict: float

    def __post_init__(self):
        for name, p in (("entail", self.entail), ("neutral", self.neutral),
                        ("contradict", self.contradict)):
            if not (0.0 <= p <= 1.0):
                raise ContractError(f"{name} probability {p} outside [0, 1]")
        total = self.entail + self.neutral + self.contradict
        if abs(total - 1.0) > 1e-6:
            raise ContractError(f"probabilities sum to {total}, expected 1")


ScoreRequest = tuple[str, str, str]  # (id, premise, hypothesis)


class NliScorer:
    """Interface: ``score_pairs`` maps (id, premise, hypothesis) to verdicts."""

    def score_pairs(self, items: Sequence[ScoreRequest]) -> dict[str, NliVerdict]:
        raise NotImplementedError


def _verdict_from_response(obj: dict) -> NliVerdict:
    try:
        return NliVerdict(
            entail=float(obj["entail"]),
            neutral=float(obj["neutral"]),
            contradict=float(obj["contradict"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScorerError(f"malformed scorer response {obj!r}: {exc}") from exc
    except ContractError as exc:
        raise ScorerError(f"scorer response violates probability contract: {exc}") from exc


def _collect_responses(lines: Sequence[str], expected_ids: set[str]) -> dict[str, NliVerdict]:
    out: dict[str, NliVerdict] = {}
    for line in lines:
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScorerError(f"scorer emitted invalid JSON: {line[:80]!r}") from exc
        if not isinstance(obj, dict) or "id" not in obj:
            raise ScorerError(f"scorer response lacks an id: {line[:80]!r}")
        rid = obj["id"]
        if rid not in expected_ids:
            raise ScorerError(f"scorer answered unknown id {rid!r}")
        if rid in out:
            raise ScorerError(f"scorer answered id {rid!r} twice")
        out[rid] = _verdict_from_response(obj)
    missing = expected_ids - out.keys()
    if missing:
        raise ScorerError(f"scorer left {len(missing)} request(s) unanswered: "
                          f"{sorted(missing)[:5]}")
    return out


def _check_items(items: Sequence[ScoreRequest]) -> set[str]:
    ids = [rid for rid, _, _ in items]
    if len(set(ids)) != len(ids):
        raise ContractError("request ids must be unique within a batch")
    return set(ids)


class SubprocessScorer(NliScorer):
    """Runs a child process per batch, speaking line JSON over stdin/stdout."""

    def __init__(self, cmd: Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        if not cmd:
            raise ContractError("scorer command must be non-empty")
        if timeout <= 0:
            raise ContractError("timeout must be positive")
        self.cmd = list(cmd)
        self.timeout = timeout

    def score_pairs(self, items: Sequence[ScoreRequest]) -> dict[str, NliVerdict]:
        if not items:
            return {}
        expected = _check_items(items)
        payload = "".join(
            json.dumps({"id": rid, "premise": premise, "hypothesis": hypothesis},
                       ensure_ascii=False) + "\n"
            for rid, premise, hypothesis in items
        )
        try:
            proc = subprocess.Popen(
                self.cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.PIPE, text=True,
            )
        except OSError as exc:
            raise ScorerError(f"could not launch scorer {self.cmd!r}: {exc}") from exc
        try:
            stdout, stderr = proc.communicate(payload, timeout=self.timeout)
        except subprocess.TimeoutExpired as exc:
            proc.kill()
            proc.wait()
            raise ScorerError(f"scorer timed out after {self.timeout}s") from exc
        if proc.returncode != 0:
            raise ScorerError(
                f"scorer exited with status {proc.returncode}: {stderr.strip()[:200]}"
            )
        return _collect_responses(stdout.splitlines(), expected)


class HttpScorer(NliScorer):
    """POSTs one request object per item to a JSON endpoint."""

    def __init__(self, url: str, timeout: float = DEFAULT_TIMEOUT):
        if timeout <= 0:
            raise ContractError("timeout must be positive")
        self.url = url
        self.timeout = timeout

    def score_pairs(self, items: Sequence[ScoreRequest]) -> dict[str, NliVerdict]:
        if not items:
            return {}
        expected = _check_items(items)
        deadline = time.monotonic() + self.timeout
        lines = []
        for rid, premise, hypothesis in items:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ScorerError(f"scorer batch timed out after {self.timeout}s")
            body = json.dumps(
                {"id": rid, "premise": premise, "hypothesis": hypothesis},
                ensure_ascii=False,
            ).encode("utf-8")
            req = urllib.request.Request(
                self.url, data=body, headers={"Content-Type": "application/json"},
            )
            try:
                with urllib.request.urlopen(req, timeout=remaining) as resp:
                    lines.append(resp.read().decode("utf-8"))
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                raise ScorerError(f"scorer request failed: {exc}") from exc
        return _collect_responses(lines, expected)


class LexicalOverlapScorer(NliScorer):
    """Deterministic local baseline from token overlap.

    Entailment probability grows linearly with the fraction of hypothesis
    tokens found in the premise: identical non-empty texts put the argmax on
    entail, disjoint texts put it elsewhere. No external process involved.
    """

    def score_pairs(self, items: Sequence[ScoreRequest]) -> dict[str, NliVerdict]:
        _check_items(items)
        out = {}
        for rid, premise, hypothesis in items:
            p_tokens = set(premise.split())
            h_tokens = set(hypothesis.split())
            overlap = len(h_tokens & p_tokens) / len(h_tokens) if h_tokens else 0.0
            entail = 0.1 + 0.8 * overlap
            rest = 1.0 - entail
            out[rid] = NliVerdict(
                entail=entail, neutral=rest * (2.0 / 3.0), contradict=rest / 3.0,
            )
        return out


def nli_score(premise: str, hypothesis: str, scorer: NliScorer) -> NliVerdict:
    """Score a single premise/hypothesis pair through any scorer backend."""
    result = scorer.score_pairs([("single", premise, hypothesis)])
    if "single" not in result:
        raise ScorerError("scorer returned no verdict for the request")
    return result["single"]
