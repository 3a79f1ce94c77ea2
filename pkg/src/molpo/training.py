"""Training loops for the four objectives, plus greedy translation.

One loop serves all methods: encode the dataset once, shuffle example order
each epoch with a seeded generator, run the selected loss over each batch,
and apply one Adam update per batch. Reference log-probabilities are
precomputed for every example before the first step — the reference model
is frozen, so they never change — which keeps preference and desirability
epochs close to the supervised loop's cost.

Desirability batches need at least two examples (the mismatched baseline
pairs each prompt with a neighbor's completion), so a trailing batch of one
is folded into its predecessor.

Any non-finite loss, gradient, or update surfaces as a training-divergence
error carrying the step at which it happened.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import data as datamod
from . import losses as lossmod
from . import numerics as nm
from . import policy as polmod
from .errors import ConfigError, NumericError, TrainingDivergedError

__all__ = [
    "METHODS", "TrainConfig", "StepRecord", "TrainResult",
    "encode_pair", "encode_triple", "encode_kto_example", "encode_dataset",
    "train", "heldout_margin", "translate_source", "translate_pairs",
    "MAX_NEW_TOKENS",
]

METHODS = ("sft", "dpo", "cpo", "kto")

MAX_NEW_TOKENS = 96  # longest toy caption is 87 characters plus the separator


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for one training run."""

    method: str
    epochs: int = 1
    batch_size: int = 8
    lr: float = 1e-3
    seed: int = 0
    loss: lossmod.LossConfig = field(default_factory=lossmod.LossConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        if self.method == "kto" and self.batch_size < 2:
            raise ConfigError("desirability training needs batch size >= 2 "
                              "for the mismatched baseline")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")


@dataclass(frozen=True)
class StepRecord:
    """One optimizer step, as logged."""

    step: int
    epoch: int
    loss: float
    components: dict

    def to_json_dict(self) -> dict:
        return {"step": self.step, "epoch": self.epoch, "loss": self.loss,
                "components": dict(self.components)}


@dataclass
class TrainResult:
    params: polmod.PolicyParams
    curve: list[float]
    steps: list[StepRecord]


# --------------------------------------------------------------------------
# encoding records into id sequences
# --------------------------------------------------------------------------

def _encode_completion(vocab: polmod.Vocab, text: str) -> list[int]:
    return polmod.encode_text(vocab, text) + [polmod.EOS]


def encode_pair(vocab: polmod.Vocab, pair: datamod.LMPair) -> tuple[list[int], list[int]]:
    """(prompt ids, completion ids); the completion is EOS-terminated."""
    prompt, completion = datamod.render_example(pair.direction, pair.source, pair.target)
    return polmod.encode_text(vocab, prompt), _encode_completion(vocab, completion)


def encode_triple(
    vocab: polmod.Vocab, triple: datamod.PreferenceTriple
) -> tuple[list[int], list[int], list[int]]:
    """(prompt ids, preferred completion ids, dispreferred completion ids)."""
    prompt_w, completion_w = datamod.render_example(
        triple.direction, triple.source, triple.preferred)
    _, completion_l = datamod.render_example(
        triple.direction, triple.source, triple.dispreferred)
    x = polmod.encode_text(vocab, prompt_w)
    return x, _encode_completion(vocab, completion_w), _encode_completion(vocab, completion_l)


def encode_kto_example(
    vocab: polmod.Vocab, example: datamod.KtoExample
) -> tuple[list[int], list[int], str]:
    """(prompt ids, completion ids, desirability label)."""
    prompt, completion = datamod.render_example(
        example.direction, example.source, example.output)
    return polmod.encode_text(vocab, prompt), _encode_completion(vocab, completion), example.label


def encode_dataset(method: str, vocab: polmod.Vocab, records: Sequence) -> list[tuple]:
    """Encode records into the batch-item shape the method's loss expects."""
    if method == "sft":
        return [encode_pair(vocab, r) for r in records]
    if method in ("dpo", "cpo"):
        return [encode_triple(vocab, r) for r in records]
    if method == "kto":
        return [encode_kto_example(vocab, r) for r in records]
    raise ConfigError(f"method must be one of {METHODS}, got {method!r}")


# --------------------------------------------------------------------------
# the loop
# --------------------------------------------------------------------------

def _batches(n: int, batch_size: int, fold_trailing_single: bool,
             rng: np.random.Generator) -> list[list[int]]:
    order = [int(i) for i in rng.permutation(n)]
    chunks = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if fold_trailing_single and len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2].extend(chunks.pop())
    return chunks


def _memoized_ref_fn(ref: polmod.PolicyParams):
    """Reference log-probabilities, cached by (prompt, completion) ids.

    The reference is frozen, so each pair is evaluated at most once across
    all epochs — later shuffles reuse earlier values (this matters for the
    desirability baseline, whose mismatched pairs vary with the shuffle).
    """
    cache: dict[tuple, float] = {}

    def fn(x, y) -> float:
        key = (tuple(x), tuple(y))
        if key not in cache:
            cache[key] = lossmod.ref_sequence_logprob(ref, x, y)
        return cache[key]

    return fn


def train(
    params: polmod.PolicyParams,
    records: Sequence,
    config: TrainConfig,
    ref: Optional[polmod.PolicyParams] = None,
    log_path=None,
) -> TrainResult:
    """Run the configured objective over the records; updates params in place.

    ``records`` are translation pairs for sft, preference triples for
    dpo/cpo, and labeled examples for kto. dpo and kto require ``ref``; cpo
    forbids it (its implied reference is uniform and cancels).
    """
    method = config.method
    if method in ("dpo", "kto") and ref is None:
        raise ConfigError(f"{method} requires a reference model (it optimizes "
                          "log-ratios against a frozen policy)")
    if method in ("sft", "cpo") and ref is not None:
        raise ConfigError(f"{method} takes no reference model")
    if not records:
        raise ConfigError("training needs at least one record")
    if method == "kto" and len(records) < 2:
        raise ConfigError("desirability training needs at least two examples")

    vocab = params.config.vocab()
    encoded = encode_dataset(method, vocab, records)
    ref_fn = _memoized_ref_fn(ref) if ref is not None else None

    rng = np.random.default_rng(config.seed)
    adam = nm.AdamState(lr=config.lr)
    curve: list[float] = []
    steps: list[StepRecord] = []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path is not None else None
    step = 0
    try:
        for epoch in range(config.epochs):
            for chunk in _batches(len(encoded), config.batch_size,
                                  fold_trailing_single=(method == "kto"), rng=rng):
                batch = [encoded[i] for i in chunk]
                step += 1
                try:
                    with nm.GradTape() as tape:
                        components: dict[str, float] = {}
                        if method == "sft":
                            loss = lossmod.sft_loss(params, batch)
                        elif method == "dpo":
                            ref_pairs = [(ref_fn(x, y_w), ref_fn(x, y_l))
                                         for x, y_w, y_l in batch]
                            loss = lossmod.dpo_loss(params, ref, batch, config.loss,
                                                    ref_logprobs=ref_pairs)
                        elif method == "cpo":
                            loss, l_prefer, l_nll = lossmod.cpo_loss(
                                params, batch, config.loss)
                            components = {"prefer": float(l_prefer.data),
                                          "nll": float(l_nll.data)}
                        else:
                            loss = lossmod.kto_loss(params, ref, batch, config.loss,
                                                    ref_logprob_fn=ref_fn)
                    loss_value = float(loss.data)
                    if not np.isfinite(loss_value):
                        raise TrainingDivergedError(
                            f"non-finite loss {loss_value!r} at step {step}")
                    grads_by_tensor = tape.backward(loss)
                    grads = {name: grads_by_tensor[t]
                             for name, t in params.tensors.items()
                             if t in grads_by_tensor}
                    nm.adam_step(adam, params.tensors, grads)
                except NumericError as exc:
                    raise TrainingDivergedError(
                        f"non-finite values at step {step}: {exc}") from exc
                record = StepRecord(step=step, epoch=epoch, loss=loss_value,
                                    components=components)
                curve.append(loss_value)
                steps.append(record)
                if log_fh is not None:
                    log_fh.write(json.dumps(record.to_json_dict(),
                                            sort_keys=True) + "\n")
    finally:
        if log_fh is not None:
            log_fh.close()
    return TrainResult(params=params, curve=curve, steps=steps)


def heldout_margin(
    params: polmod.PolicyParams, triples: Sequence[datamod.PreferenceTriple]
) -> float:
    """Mean log-probability margin of preferred over dispreferred outputs."""
    vocab = params.config.vocab()
    batch = [encode_triple(vocab, t) for t in triples]
    return lossmod.preference_margin(params, batch)


# --------------------------------------------------------------------------
# inference
# --------------------------------------------------------------------------

def translate_source(
    params: polmod.PolicyParams,
    direction: str,
    source: str,
    max_new: int = MAX_NEW_TOKENS,
) -> str:
    """Greedy-decode one translation; surrounding whitespace is stripped.

    (The molecule template separates marker and target with one space, so
    completions for that direction legitimately start with one.)
    """
    vocab = params.config.vocab()
    prompt = datamod.render_prompt(direction, source)
    x_ids = polmod.encode_text(vocab, prompt)
    out_ids = polmod.greedy_decode(params, x_ids, max_len=max_new)
    return polmod.decode_text(vocab, out_ids).strip()


def translate_pairs(
    params: polmod.PolicyParams,
    pairs: Sequence[datamod.LMPair],
    max_new: int = MAX_NEW_TOKENS,
) -> list[dict]:
    """Greedy predictions for a pair file, as serializable rows."""
    return [
        {"id": p.id, "direction": p.direction, "source": p.source,
         "prediction": translate_source(params, p.direction, p.source, max_new)}
        for p in pairs
    ]
