"""Character-level transformer policy.

A deliberately small causal transformer (token+position embeddings, one or
more blocks of multi-head attention and a sigmoid MLP, rms normalization, a
linear output head) built entirely from the primitives in ``molpo.numerics``
so that every loss in the toolkit is differentiable end to end.

Sequences are laid out as ``[BOS] + prompt + completion`` with the completion
terminated by EOS; log-probability mass is only ever attached to completion
tokens, never to the prompt. PAD appended after EOS is inert: it is excluded
from the scored positions and, being causally masked, cannot influence them.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .errors import ConfigError, ContractError, LengthError, OovError
from .numerics import Tensor

__all__ = [
    "BOS", "EOS", "PAD", "SEP", "SPECIAL_NAMES",
    "Vocab", "ModelConfig", "PolicyParams",
    "encode_text", "decode_text",
    "init_params", "forward_logits",
    "sequence_logprob", "sequence_logprob_tensor", "completion_distributions",
    "greedy_decode", "sample_decode",
]

BOS, EOS, PAD, SEP = 0, 1, 2, 3
SPECIAL_NAMES = ("<bos>", "<eos>", "<pad>", "<sep>")


@dataclass(frozen=True)
class Vocab:
    """Bijective char<->id map; ids 0..3 are the specials, chars follow sorted."""

    chars: str
    _stoi: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if len(set(self.chars)) != len(self.chars):
            raise ConfigError("vocabulary characters must be unique")
        if list(self.chars) != sorted(self.chars):
            raise ConfigError("vocabulary characters must be sorted")
        object.__setattr__(
            self, "_stoi", {c: len(SPECIAL_NAMES) + i for i, c in enumerate(self.chars)}
        )

    @classmethod
    def from_corpus(cls, texts: Iterable[str]) -> "Vocab":
        seen = set()
        for t in texts:
            seen.update(t)
        return cls("".join(sorted(seen)))

    @property
    def size(self) -> int:
        return len(SPECIAL_NAMES) + len(self.chars)

    def id_of(self, ch: str) -> int | None:
        return self._stoi.get(ch)

    def char_of(self, idx: int) -> str:
        return self.chars[idx - len(SPECIAL_NAMES)]


def encode_text(vocab: Vocab, text: str) -> list[int]:
    """Map text to ids; unknown characters fail loudly with char + offset."""
    out = []
    for i, ch in enumerate(text):
        idx = vocab.id_of(ch)
        if idx is None:
            raise OovError(ch, i)
        out.append(idx)
    return out


def decode_text(vocab: Vocab, ids: Sequence[int]) -> str:
    """Map ids back to text; special ids are skipped, not rendered."""
    pieces = []
    for idx in ids:
        if idx < 0 or idx >= vocab.size:
            raise ContractError(f"token id {idx} outside vocabulary of size {vocab.size}")
        if idx >= len(SPECIAL_NAMES):
            pieces.append(vocab.char_of(idx))
    return "".join(pieces)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters plus the vocabulary inventory.

    ``chars`` rides along so a checkpoint is self-describing: translate and
    merge need only the checkpoint file. The fingerprint covers everything
    that must match for two models to be interchangeable — architecture and
    vocabulary — and deliberately excludes ``seed``.
    """

    vocab_size: int
    dim: int = 48
    blocks: int = 1
    heads: int = 2
    max_seq: int = 512
    seed: int = 0
    chars: str | None = None

    def __post_init__(self):
        if self.vocab_size < len(SPECIAL_NAMES) + 1:
            raise ConfigError("vocab_size must cover the specials plus at least one character")
        if self.dim <= 0 or self.blocks <= 0 or self.heads <= 0 or self.max_seq <= 0:
            raise ConfigError("dim, blocks, heads and max_seq must be positive")
        if self.dim % self.heads != 0:
            raise ConfigError(f"dim {self.dim} is not divisible by heads {self.heads}")
        if self.chars is not None and self.vocab_size != len(SPECIAL_NAMES) + len(self.chars):
            raise ConfigError("vocab_size disagrees with the character inventory")

    def fingerprint(self) -> str:
        payload = {
            "vocab_size": self.vocab_size,
            "dim": self.dim,
            "blocks": self.blocks,
            "heads": self.heads,
            "max_seq": self.max_seq,
            "chars": self.chars,
        }
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def vocab(self) -> Vocab:
        if self.chars is None:
            raise ConfigError("model config carries no character inventory")
        return Vocab(self.chars)


@dataclass
class PolicyParams:
    """Named parameter tensors for one policy model."""

    config: ModelConfig
    tensors: dict[str, Tensor]

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint()

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            config=self.config,
            tensors={k: nm.tensor(v.data.copy(), requires_grad=True) for k, v in self.tensors.items()},
        )


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(config: ModelConfig) -> PolicyParams:
    """Deterministically initialize parameters from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    d, v = config.dim, config.vocab_size
    dh = d // config.heads
    tensors: dict[str, Tensor] = {}

    def put(name: str, arr: np.ndarray) -> None:
        tensors[name] = nm.tensor(arr, requires_grad=True)

    put("tok_emb", rng.uniform(-0.1, 0.1, size=(v, d)))
    put("pos_emb", rng.uniform(-0.1, 0.1, size=(config.max_seq, d)))
    for b in range(config.blocks):
        for h in range(config.heads):
            pre = f"block{b}.head{h}."
            put(pre + "wq", _glorot(rng, d, dh))
            put(pre + "wk", _glorot(rng, d, dh))
            put(pre + "wv", _glorot(rng, d, dh))
        put(f"block{b}.wo", _glorot(rng, d, d))
        put(f"block{b}.w1", _glorot(rng, d, 4 * d))
        put(f"block{b}.w2", _glorot(rng, 4 * d, d))
    put("out", _glorot(rng, d, v))
    return PolicyParams(config=config, tensors=tensors)


_MASK_CACHE: dict[int, Tensor] = {}


def _causal_mask(t: int) -> Tensor:
    """Additive mask: 0 on/below the diagonal, -1e9 above (finite by design)."""
    cached = _MASK_CACHE.get(t)
    if cached is None:
        m = np.triu(np.full((t, t), -1e9), k=1)
        cached = nm.tensor(m)
        _MASK_CACHE[t] = cached
    return cached


def _rms_norm(x: Tensor) -> Tensor:
    ms = nm.reduce_mean(nm.mul(x, x), axis=1, keepdims=True)
    inv = nm.power(nm.shift(ms, 1e-8), -0.5)
    return nm.mul(x, inv)


def forward_logits(params: PolicyParams, ids: Sequence[int]) -> Tensor:
    """Causal forward pass; returns next-token logits of shape [len(ids), V]."""
    cfg = params.config
    t = len(ids)
    if t == 0:
        raise ContractError("forward pass needs at least one input token")
    if t > cfg.max_seq:
        raise LengthError(f"sequence of {t} tokens exceeds context of {cfg.max_seq}")
    p = params.tensors
    dh = cfg.dim // cfg.heads

    x = nm.add(nm.gather_rows(p["tok_emb"], ids), nm.gather_rows(p["pos_emb"], range(t)))
    mask = _causal_mask(t)
    for b in range(cfg.blocks):
        h_in = _rms_norm(x)
        heads = []
        for h in range(cfg.heads):
            pre = f"block{b}.head{h}."
            q = nm.matmul(h_in, p[pre + "wq"])
            k = nm.matmul(h_in, p[pre + "wk"])
            v = nm.matmul(h_in, p[pre + "wv"])
            scores = nm.add(nm.scale(nm.matmul(q, nm.transpose(k)), 1.0 / math.sqrt(dh)), mask)
            attn = nm.exp(nm.log_softmax(scores))
            heads.append(nm.matmul(attn, v))
        x = nm.add(x, nm.matmul(nm.concat(heads, axis=1), p[f"block{b}.wo"]))
        h_mlp = _rms_norm(x)
        x = nm.add(x, nm.matmul(nm.sigmoid(nm.matmul(h_mlp, p[f"block{b}.w1"])), p[f"block{b}.w2"]))
    return nm.matmul(_rms_norm(x), p["out"])


def _check_completion(y_ids: Sequence[int]) -> int:
    """Validate EOS termination; returns the count of scored tokens."""
    if not y_ids:
        raise ContractError("completion must be non-empty")
    try:
        eos_at = list(y_ids).index(EOS)
    except ValueError:
        raise ContractError("completion must be terminated by EOS") from None
    for tok in y_ids[eos_at + 1:]:
        if tok != PAD:
            raise ContractError("only PAD may follow EOS in a completion")
    return eos_at + 1


def _scored_sequence(params: PolicyParams, x_ids: Sequence[int], y_ids: Sequence[int]):
    """Forward pass over [BOS]+x+y; returns (logprob rows, scored positions, targets)."""
    n_scored = _check_completion(y_ids)
    tokens = [BOS, *x_ids, *y_ids]
    inputs = tokens[:-1]
    logits = forward_logits(params, inputs)
    logp = nm.log_softmax(logits)
    # position i of `inputs` predicts tokens[i+1]; completion tokens start at
    # index 1+len(x) of `tokens`, so their predictors sit at len(x)..len(x)+n-1
    start = len(x_ids)
    positions = list(range(start, start + n_scored))
    targets = [tokens[i + 1] for i in positions]
    return logp, positions, targets


def sequence_logprob_tensor(params: PolicyParams, x_ids: Sequence[int], y_ids: Sequence[int]) -> Tensor:
    """Differentiable total log-probability of the completion given the prompt."""
    logp, positions, targets = _scored_sequence(params, x_ids, y_ids)
    onehot = np.zeros(logp.data.shape)
    for pos, tgt in zip(positions, targets):
        onehot[pos, tgt] = 1.0
    return nm.reduce_sum(nm.mul(logp, nm.tensor(onehot)))


def sequence_logprob(
    params: PolicyParams, x_ids: Sequence[int], y_ids: Sequence[int]
) -> tuple[float, list[float]]:
    """Total and per-token log-probabilities (no gradient recording).

    The total is the sequential left-to-right sum of the per-token values, so
    ``total == sum(per_token)`` holds exactly.
    """
    with nm.no_record():
        logp, positions, targets = _scored_sequence(params, x_ids, y_ids)
    per_token = [float(logp.data[pos, tgt]) for pos, tgt in zip(positions, targets)]
    total = 0.0
    for v in per_token:
        total += v
    return total, per_token


def completion_distributions(
    params: PolicyParams, x_ids: Sequence[int], y_ids: Sequence[int]
) -> np.ndarray:
    """Log-softmax rows at the positions that predict each completion token.

    Shape [n_completion_tokens, vocab_size]; no gradients are recorded. Used
    for per-sequence KL estimates between a policy and a frozen reference.
    """
    with nm.no_record():
        logp, positions, _ = _scored_sequence(params, x_ids, y_ids)
    return logp.data[positions]


_DECODE_SUPPRESSED = (BOS, PAD, SEP)


def _next_logits(params: PolicyParams, prefix: list[int]) -> np.ndarray:
    with nm.no_record():
        logits = forward_logits(params, prefix)
    row = logits.data[-1].copy()
    for idx in _DECODE_SUPPRESSED:
        row[idx] = -np.inf
    return row


def greedy_decode(params: PolicyParams, x_ids: Sequence[int], max_len: int) -> list[int]:
    """Argmax decoding; stops at EOS or ``max_len``; EOS is not included.

    Ties at the argmax resolve to the lowest token id. BOS/PAD/SEP can never
    be emitted.
    """
    if max_len < 1:
        raise ContractError("max_len must be at least 1")
    prefix = [BOS, *x_ids]
    out: list[int] = []
    for _ in range(max_len):
        if len(prefix) >= params.config.max_seq:
            break
        tok = int(np.argmax(_next_logits(params, prefix)))
        if tok == EOS:
            break
        out.append(tok)
        prefix.append(tok)
    return out


def sample_decode(
    params: PolicyParams,
    x_ids: Sequence[int],
    max_len: int,
    temperature: float,
    seed: int,
) -> list[int]:
    """Temperature sampling with a dedicated generator; same stop rules as greedy."""
    if max_len < 1:
        raise ContractError("max_len must be at least 1")
    if temperature <= 0:
        raise ContractError("temperature must be positive")
    rng = np.random.default_rng(seed)
    prefix = [BOS, *x_ids]
    out: list[int] = []
    for _ in range(max_len):
        if len(prefix) >= params.config.max_seq:
            break
        row = _next_logits(params, prefix) / temperature
        row -= row.max()
        with np.errstate(under="ignore"):
            probs = np.exp(row)
        probs /= probs.sum()
        tok = int(rng.choice(len(probs), p=probs))
        if tok == EOS:
            break
        out.append(tok)
        prefix.append(tok)
    return out
