"""Preference-optimization objectives over policy models.

All losses return scalar Tensors built from ``molpo.numerics`` primitives, so
``GradTape.backward`` yields exact gradients; float-only diagnostics (reward
probabilities, objective estimates, value-function checks) return plain
floats. Throughout, log sigmoid is evaluated as ``-softplus(-z)`` — never as
``log(sigmoid(z))`` — so large-margin batches cannot underflow to -inf.

Batch conventions (token ids come from ``molpo.policy.encode_text``):

* pair batch:         [(x_ids, y_ids), ...]
* triple batch:       [(x_ids, y_w_ids, y_l_ids), ...]   (preferred first)
* desirability batch: [(x_ids, y_ids, label), ...] with label "preferred" or
  "dispreferred"

Batch reductions are sequential left-to-right sums scaled by 1/n, so repeated
runs produce bit-identical losses.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import ConfigError, ContractError, NumericError
from .numerics import Tensor
from .policy import (
    PolicyParams,
    completion_distributions,
    sequence_logprob,
    sequence_logprob_tensor,
)

__all__ = [
    "PREFERRED", "DISPREFERRED",
    "LossConfig",
    "bt_preference_prob", "reward_pair_loss", "rlhf_objective_estimate",
    "sft_loss", "dpo_loss", "cpo_loss",
    "kto_zref", "kto_value", "kto_loss",
    "HaloCheck", "halo_value_check",
    "preference_margin", "ref_sequence_logprob",
]

PREFERRED = "preferred"
DISPREFERRED = "dispreferred"


@dataclass(frozen=True)
class LossConfig:
    """Shared hyperparameters: β scales reward log-ratios, λ weight the
    preferred/dispreferred sides of desirability losses."""

    beta: float = 0.1
    lambda_p: float = 1.0
    lambda_d: float = 1.0

    def __post_init__(self):
        if not (self.beta > 0):
            raise ConfigError("beta must be positive")
        if not (self.lambda_p > 0 and self.lambda_d > 0):
            raise ConfigError("lambda weights must be positive")


def _stable_sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _stable_softplus(z: float) -> float:
    # log(1 + e^z) without overflow for large |z|
    if z > 0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


def bt_preference_prob(reward_w: float, reward_l: float) -> float:
    """Bradley–Terry probability that the first reward's completion wins."""
    p = _stable_sigmoid(reward_w - reward_l)
    if not math.isfinite(p):
        raise NumericError("non-finite preference probability")
    return p


def reward_pair_loss(reward_w: float, reward_l: float) -> float:
    """Negative log-likelihood of the observed preference, -log σ(r_w - r_l)."""
    out = _stable_softplus(-(reward_w - reward_l))
    if not math.isfinite(out):
        raise NumericError("non-finite reward pair loss")
    return out


def _check_batch(batch: Sequence) -> None:
    if len(batch) == 0:
        raise ContractError("loss batch must be non-empty")


def _sequential_mean(parts: list[Tensor]) -> Tensor:
    acc = parts[0]
    for p in parts[1:]:
        acc = nm.add(acc, p)
    return nm.scale(acc, 1.0 / len(parts))


def ref_sequence_logprob(ref: PolicyParams, x_ids, y_ids) -> float:
    """Frozen-model completion log-probability, with no gradient recording.

    Evaluated through the same tensor code path as the policy side so that
    identical parameters produce bit-identical values (exact zero margins).
    """
    with nm.no_record():
        return float(sequence_logprob_tensor(ref, x_ids, y_ids).data)


_ref_logprob = ref_sequence_logprob


def sft_loss(policy: PolicyParams, batch: Sequence[tuple]) -> Tensor:
    """Mean negative log-likelihood of completions given prompts."""
    _check_batch(batch)
    parts = [nm.neg(sequence_logprob_tensor(policy, x, y)) for x, y in batch]
    return _sequential_mean(parts)


def dpo_loss(
    policy: PolicyParams,
    ref: PolicyParams,
    batch: Sequence[tuple],
    config: LossConfig,
    ref_logprobs: Sequence[tuple[float, float]] | None = None,
) -> Tensor:
    """Direct preference loss: -log σ(β[(logπ-logπref)_w - (logπ-logπref)_l]).

    When the policy equals the reference every margin is exactly zero and the
    loss is ln 2. ``ref_logprobs`` may supply precomputed (ref_w, ref_l)
    pairs for the batch (the reference is frozen, so callers can cache them).
    """
    _check_batch(batch)
    parts = []
    for i, (x, y_w, y_l) in enumerate(batch):
        lp_w = sequence_logprob_tensor(policy, x, y_w)
        lp_l = sequence_logprob_tensor(policy, x, y_l)
        if ref_logprobs is not None:
            ref_w, ref_l = ref_logprobs[i]
        else:
            ref_w = _ref_logprob(ref, x, y_w)
            ref_l = _ref_logprob(ref, x, y_l)
        margin = nm.scale(nm.shift(nm.sub(lp_w, lp_l), -(ref_w - ref_l)), config.beta)
        parts.append(nm.softplus(nm.neg(margin)))
    return _sequential_mean(parts)


def cpo_loss(
    policy: PolicyParams,
    batch: Sequence[tuple],
    config: LossConfig,
) -> tuple[Tensor, Tensor, Tensor]:
    """Reference-free contrastive loss plus anchoring NLL on preferred outputs.

    Returns ``(total, l_prefer, l_nll)`` where total = l_prefer + l_nll. The
    implied reference is uniform, so it cancels from the preference margin.
    On a degenerate triple (y_w == y_l) the margin is exactly zero and the
    preference term contributes ln 2.
    """
    _check_batch(batch)
    prefer_parts, nll_parts = [], []
    for x, y_w, y_l in batch:
        lp_w = sequence_logprob_tensor(policy, x, y_w)
        lp_l = sequence_logprob_tensor(policy, x, y_l)
        margin = nm.scale(nm.sub(lp_w, lp_l), config.beta)
        prefer_parts.append(nm.softplus(nm.neg(margin)))
        nll_parts.append(nm.neg(lp_w))
    l_prefer = _sequential_mean(prefer_parts)
    l_nll = _sequential_mean(nll_parts)
    return nm.add(l_prefer, l_nll), l_prefer, l_nll


def _check_label(label: str) -> None:
    if label not in (PREFERRED, DISPREFERRED):
        raise ContractError(f"desirability label must be {PREFERRED!r} or {DISPREFERRED!r}, got {label!r}")


def kto_zref(
    policy: PolicyParams,
    ref: PolicyParams,
    batch: Sequence[tuple],
    config: LossConfig,
    ref_logprob_fn: Callable | None = None,
) -> float:
    """Detached desirability baseline from mismatched prompt/completion pairs.

    Each prompt is paired with its neighbor's completion (j = i+1 mod n); the
    baseline is the clamped mean policy/reference log-ratio on those pairs:
    z_ref = max(0, β · mean_i [log π(y_j|x_i) - log π_ref(y_j|x_i)]). Nothing
    here records gradients — the baseline is a constant for the batch.

    ``ref_logprob_fn(x, y) -> float`` optionally replaces direct evaluation of
    the frozen reference (training loops memoize it).
    """
    _check_batch(batch)
    if len(batch) < 2:
        raise ContractError("desirability batches need >= 2 examples for the mismatched baseline")
    for _, _, label in batch:
        _check_label(label)
    if ref_logprob_fn is None:
        ref_logprob_fn = lambda x, y: _ref_logprob(ref, x, y)  # noqa: E731

    n = len(batch)
    total = 0.0
    with nm.no_record():
        for i in range(n):
            x_i = batch[i][0]
            y_j = batch[(i + 1) % n][1]
            lp_policy = float(sequence_logprob_tensor(policy, x_i, y_j).data)
            total += lp_policy - ref_logprob_fn(x_i, y_j)
    return max(0.0, config.beta * (total / n))


def kto_value(reward: float, z_ref: float, label: str) -> float:
    """Prospect-style value of a reward: σ(r - z_ref) if preferred, σ(z_ref - r) otherwise."""
    _check_label(label)
    s = reward - z_ref if label == PREFERRED else z_ref - reward
    return _stable_sigmoid(s)


def kto_loss(
    policy: PolicyParams,
    ref: PolicyParams,
    batch: Sequence[tuple],
    config: LossConfig,
    z_ref: float | None = None,
    ref_logprob_fn: Callable | None = None,
) -> Tensor:
    """Desirability loss: mean over examples of λ(label) · (1 - value(r_i)).

    Rewards r_i = β·(log π(y_i|x_i) - log π_ref(y_i|x_i)) keep their gradient
    graphs; the baseline does not. ``1 - σ(s)`` is evaluated as ``σ(-s)``
    (identical algebra, no cancellation). With policy == reference and unit λ
    the loss is exactly 0.5: rewards and baseline are all zero, so every value
    is σ(0) = 1/2.

    Passing ``z_ref`` explicitly skips the baseline recomputation and holds it
    constant — finite-difference oracles rely on this to probe only the
    differentiable part, mirroring the detach semantics of the analytic
    gradient.
    """
    if z_ref is None:
        z_ref = kto_zref(policy, ref, batch, config, ref_logprob_fn=ref_logprob_fn)
    else:
        _check_batch(batch)
        for _, _, label in batch:
            _check_label(label)
    if ref_logprob_fn is None:
        ref_logprob_fn = lambda x, y: _ref_logprob(ref, x, y)  # noqa: E731
    parts = []
    for x, y, label in batch:
        lp = sequence_logprob_tensor(policy, x, y)
        r = nm.scale(nm.shift(lp, -ref_logprob_fn(x, y)), config.beta)
        s = nm.shift(r, -z_ref)
        if label == PREFERRED:
            parts.append(nm.scale(nm.sigmoid(nm.neg(s)), config.lambda_p))
        else:
            parts.append(nm.scale(nm.sigmoid(s), config.lambda_d))
    return _sequential_mean(parts)


def rlhf_objective_estimate(
    policy: PolicyParams,
    ref: PolicyParams,
    batch: Sequence[tuple],
    rewards: Sequence[float],
    config: LossConfig,
) -> float:
    """Monte-Carlo estimate of mean(reward) - β · mean per-sequence KL(π‖π_ref).

    The KL is summed over completion positions from full next-token
    distributions. Identical policy and reference give exactly
    ``mean(rewards)``.
    """
    _check_batch(batch)
    if len(rewards) != len(batch):
        raise ContractError("one reward per batch element is required")
    kl_total = 0.0
    for x, y in batch:
        rows_policy = completion_distributions(policy, x, y)
        rows_ref = completion_distributions(ref, x, y)
        p = np.exp(rows_policy)
        kl_total += float((p * (rows_policy - rows_ref)).sum())
    reward_mean = 0.0
    for r in rewards:
        reward_mean += float(r)
    reward_mean /= len(rewards)
    out = reward_mean - config.beta * (kl_total / len(batch))
    if not math.isfinite(out):
        raise NumericError("non-finite objective estimate")
    return out


@dataclass(frozen=True)
class HaloCheck:
    """Result of probing a value function on a grid."""

    monotone: bool
    concave: bool


def halo_value_check(value_fn: Callable[[float], float], grid: Sequence[float]) -> HaloCheck:
    """Check that a scalar value function is non-decreasing and concave on a grid.

    The grid must be strictly increasing, strictly positive, and hold at
    least three points. Monotonicity allows 1e-12 of slack; concavity is
    tested as non-increasing divided-difference slopes (correct on non-uniform
    grids, equivalent to a second-difference test on uniform ones) with the
    same slack.
    """
    zs = [float(z) for z in grid]
    if len(zs) < 3:
        raise ContractError("value-function grid needs at least 3 points")
    if any(z <= 0 for z in zs):
        raise ContractError("value-function grid must be strictly positive")
    if any(b <= a for a, b in zip(zs, zs[1:])):
        raise ContractError("value-function grid must be strictly increasing")
    vs = [float(value_fn(z)) for z in zs]
    if any(not math.isfinite(v) for v in vs):
        raise NumericError("value function produced non-finite outputs on the grid")

    tol = 1e-12
    monotone = all(v2 >= v1 - tol for v1, v2 in zip(vs, vs[1:]))
    slopes = [(v2 - v1) / (z2 - z1) for (z1, v1), (z2, v2) in zip(zip(zs, vs), zip(zs[1:], vs[1:]))]
    concave = all(s2 <= s1 + tol for s1, s2 in zip(slopes, slopes[1:]))
    return HaloCheck(monotone=monotone, concave=concave)


def preference_margin(policy: PolicyParams, batch: Sequence[tuple]) -> float:
    """Diagnostic: mean log-probability margin of preferred over dispreferred."""
    _check_batch(batch)
    total = 0.0
    for x, y_w, y_l in batch:
        lp_w, _ = sequence_logprob(policy, x, y_w)
        lp_l, _ = sequence_logprob(policy, x, y_l)
        total += lp_w - lp_l
    return total / len(batch)
