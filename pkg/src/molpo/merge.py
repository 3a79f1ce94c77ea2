"""Checkpoint serialization and non-linear model fusion.

Checkpoint file layout (all little-endian):

    [8-byte unsigned manifest length][UTF-8 JSON manifest][float32 payload]

The manifest lists tensor entries as ``{name, shape, dtype, offset, nbytes}``
with offsets relative to the payload start, ascending and non-overlapping;
the payload is exactly the concatenation of row-major float32 tensor bytes.
The manifest also embeds the model config (including the vocabulary
inventory), so a checkpoint alone is enough to rebuild tokenizer + model.

Merging happens in float64 and rounds once back to float32 at the end; all
merge functions require identical tensor names, shapes, and config
fingerprints and raise CompatibilityError otherwise.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import tempfile
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .errors import CompatibilityError, ConfigError, ContractError, MolpoError
from .policy import ModelConfig, PolicyParams

__all__ = [
    "CHECKPOINT_VERSION",
    "CheckpointError", "CorruptManifestError", "UnsupportedVersionError",
    "OffsetOverlapError", "TruncatedPayloadError", "DegenerateTensorError",
    "Checkpoint", "save_checkpoint", "load_checkpoint",
    "MergeConfig", "task_vector", "ties_merge", "slerp_merge", "lerp_merge",
    "ratio_to_t",
]

CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<Q")


class CheckpointError(MolpoError):
    """Base class for checkpoint (de)serialization failures."""


class CorruptManifestError(CheckpointError):
    """The manifest is unreadable, inconsistent, or disagrees with the payload."""


class UnsupportedVersionError(CheckpointError):
    """The checkpoint declares a format version this code does not speak."""


class OffsetOverlapError(CheckpointError):
    """Tensor payload ranges overlap or are out of order."""


class TruncatedPayloadError(CheckpointError):
    """The payload ends before the manifest says it should."""


class DegenerateTensorError(ContractError):
    """A spherical interpolation input has zero norm."""


@dataclass
class Checkpoint:
    """An in-memory checkpoint: float32 tensors plus their describing config."""

    config: dict
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION

    @classmethod
    def from_params(cls, params: PolicyParams) -> "Checkpoint":
        cfg = params.config
        config = {
            "vocab_size": cfg.vocab_size,
            "dim": cfg.dim,
            "blocks": cfg.blocks,
            "heads": cfg.heads,
            "max_seq": cfg.max_seq,
            "seed": cfg.seed,
            "chars": cfg.chars,
        }
        tensors = {
            name: np.ascontiguousarray(t.data, dtype="<f4")
            for name, t in params.tensors.items()
        }
        return cls(config=config, tensors=tensors)

    def model_config(self) -> ModelConfig:
        return ModelConfig(**self.config)

    def to_params(self) -> PolicyParams:
        return PolicyParams(
            config=self.model_config(),
            tensors={
                name: nm.tensor(arr.astype(np.float64), requires_grad=True)
                for name, arr in self.tensors.items()
            },
        )

    @property
    def fingerprint(self) -> str:
        return self.model_config().fingerprint()

    def content_digest(self) -> str:
        """Digest of names, shapes, and payload bytes; identifies the weights."""
        h = hashlib.sha256()
        for name, arr in self.tensors.items():
            h.update(name.encode("utf-8"))
            h.update(str(arr.shape).encode("ascii"))
            h.update(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        return h.hexdigest()

    def save(self, path) -> None:
        entries = []
        payload_parts = []
        offset = 0
        for name, arr in self.tensors.items():
            raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
            entries.append({
                "name": name,
                "shape": list(arr.shape),
                "dtype": "f32",
                "offset": offset,
                "nbytes": len(raw),
            })
            payload_parts.append(raw)
            offset += len(raw)
        manifest = {
            "version": self.version,
            "fingerprint": self.fingerprint,
            "config": self.config,
            "tensors": entries,
        }
        blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
        path = os.fspath(path)
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", prefix=".ckpt-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(_HEADER.pack(len(blob)))
                fh.write(blob)
                for part in payload_parts:
                    fh.write(part)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < _HEADER.size:
            raise CorruptManifestError("file too short for a manifest header")
        (mlen,) = _HEADER.unpack_from(raw, 0)
        if len(raw) < _HEADER.size + mlen:
            raise CorruptManifestError("file ends inside the manifest")
        try:
            manifest = json.loads(raw[_HEADER.size:_HEADER.size + mlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptManifestError(f"manifest is not valid JSON: {exc}") from exc
        if not isinstance(manifest, dict):
            raise CorruptManifestError("manifest must be a JSON object")

        version = manifest.get("version")
        if version != CHECKPOINT_VERSION:
            raise UnsupportedVersionError(f"unsupported checkpoint version {version!r}")
        config = manifest.get("config")
        entries = manifest.get("tensors")
        if not isinstance(config, dict) or not isinstance(entries, list):
            raise CorruptManifestError("manifest is missing config or tensor entries")

        expected = 0
        prev_end = 0
        total_nbytes = 0
        seen = set()
        for e in entries:
            try:
                name, shape, dtype = e["name"], e["shape"], e["dtype"]
                off, nbytes = int(e["offset"]), int(e["nbytes"])
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptManifestError(f"malformed tensor entry: {e!r}") from exc
            if dtype != "f32":
                raise CorruptManifestError(f"tensor {name!r} has unsupported dtype {dtype!r}")
            if name in seen:
                raise CorruptManifestError(f"duplicate tensor name {name!r}")
            seen.add(name)
            size = 1
            for dim in shape:
                size *= int(dim)
            if nbytes != size * 4:
                raise CorruptManifestError(
                    f"tensor {name!r}: nbytes {nbytes} disagrees with shape {shape}"
                )
            if off < prev_end:
                raise OffsetOverlapError(
                    f"tensor {name!r} offset {off} overlaps previous range ending at {prev_end}"
                )
            prev_end = off + nbytes
            expected = prev_end
            total_nbytes += nbytes
        if expected != total_nbytes:
            raise CorruptManifestError("tensor ranges leave gaps in the payload")

        payload = raw[_HEADER.size + mlen:]
        if len(payload) < expected:
            raise TruncatedPayloadError(
                f"payload holds {len(payload)} bytes, manifest requires {expected}"
            )
        if len(payload) > expected:
            raise CorruptManifestError(
                f"payload holds {len(payload)} bytes beyond the declared {expected}"
            )

        tensors = {}
        for e in entries:
            shape = tuple(int(d) for d in e["shape"])
            start, nbytes = int(e["offset"]), int(e["nbytes"])
            arr = np.frombuffer(payload, dtype="<f4", count=nbytes // 4, offset=start)
            tensors[e["name"]] = arr.reshape(shape).copy()

        ckpt = cls(config=config, tensors=tensors, version=version)
        declared = manifest.get("fingerprint")
        try:
            actual = ckpt.fingerprint
        except (ConfigError, TypeError) as exc:
            raise CorruptManifestError(f"manifest config is invalid: {exc}") from exc
        if declared != actual:
            raise CorruptManifestError("config fingerprint does not match manifest")
        return ckpt


def save_checkpoint(params: PolicyParams, path) -> None:
    """Serialize policy parameters (rounded to float32) to ``path`` atomically."""
    Checkpoint.from_params(params).save(path)


def load_checkpoint(path) -> PolicyParams:
    """Load a checkpoint and rebuild float64 trainable parameters."""
    return Checkpoint.load(path).to_params()


def _check_compatible(a: Checkpoint, b: Checkpoint, what: str) -> None:
    if a.fingerprint != b.fingerprint:
        raise CompatibilityError(f"{what}: config fingerprints differ")
    if a.tensors.keys() != b.tensors.keys():
        raise CompatibilityError(f"{what}: tensor name sets differ")
    for name in a.tensors:
        if a.tensors[name].shape != b.tensors[name].shape:
            raise CompatibilityError(
                f"{what}: tensor {name!r} shapes differ "
                f"({a.tensors[name].shape} vs {b.tensors[name].shape})"
            )


@dataclass(frozen=True)
class MergeConfig:
    """Knobs for the fusion algorithms.

    ``density`` is the fraction of delta coordinates kept by trimming;
    ``lam`` rescales the merged delta before it is added back to the base;
    ``parallel_threshold`` is the |cosine| above which spherical interpolation
    falls back to linear.
    """

    density: float = 0.2
    lam: float = 1.0
    parallel_threshold: float = 0.9995

    def __post_init__(self):
        if not (0.0 < self.density <= 1.0):
            raise ConfigError("density must lie in (0, 1]")
        if not math.isfinite(self.lam):
            raise ConfigError("lam must be finite")
        if not (0.0 < self.parallel_threshold < 1.0):
            raise ConfigError("parallel_threshold must lie in (0, 1)")


def task_vector(model: Checkpoint, base: Checkpoint) -> dict[str, np.ndarray]:
    """Per-tensor float64 delta (model - base)."""
    _check_compatible(model, base, "task_vector")
    return {
        name: model.tensors[name].astype(np.float64) - base.tensors[name].astype(np.float64)
        for name in model.tensors
    }


def _trim(delta: np.ndarray, density: float) -> np.ndarray:
    """Zero all but the top ceil(density*n) coordinates by magnitude.

    Ties at the cut are broken by position (stable sort on descending
    magnitude), so trimming is deterministic.
    """
    flat = delta.reshape(-1)
    n = flat.size
    k = math.ceil(density * n)
    if k >= n:
        return delta.copy()
    order = np.argsort(-np.abs(flat), kind="stable")
    out = np.zeros_like(flat)
    keep = order[:k]
    out[keep] = flat[keep]
    return out.reshape(delta.shape)


def ties_merge(
    base: Checkpoint,
    models: Sequence[Checkpoint],
    weights: Sequence[float],
    config: MergeConfig,
) -> Checkpoint:
    """Trim-elect-merge fusion of task vectors.

    Per tensor: each model's delta is trimmed to the top ``density`` fraction
    by magnitude; a weight-scaled sum elects a sign per coordinate (exact
    zero elects positive); sign-matching trimmed values are combined by
    weighted mean; the result, scaled by ``lam``, is added to the base.

    The output is invariant to the order of ``models``: contributions are
    accumulated in a canonical order (sorted by content digest), so even
    float rounding cannot depend on argument order.
    """
    if len(models) == 0:
        raise ConfigError("ties_merge needs at least one model")
    if len(weights) != len(models):
        raise ConfigError("one weight per model is required")
    ws = [float(w) for w in weights]
    if any(w < 0 for w in ws):
        raise ConfigError("weights must be non-negative")
    if not any(w > 0 for w in ws):
        raise ConfigError("at least one weight must be positive")
    for m in models:
        _check_compatible(base, m, "ties_merge")

    ranked = sorted(zip(models, ws), key=lambda mw: mw[0].content_digest())
    trimmed_all = [
        {name: _trim(d, config.density) for name, d in task_vector(m, base).items()}
        for m, _ in ranked
    ]
    out_tensors = {}
    for name, base_arr in base.tensors.items():
        stack = np.stack([t[name] for t in trimmed_all])  # [n_models, ...]
        wcol = np.array([w for _, w in ranked]).reshape((-1,) + (1,) * base_arr.ndim)
        elected = np.where((stack * wcol).sum(axis=0) < 0, -1.0, 1.0)
        match = (stack != 0) & (np.sign(stack) == elected)
        num = (stack * wcol * match).sum(axis=0)
        den = (wcol * match).sum(axis=0)
        merged = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
        out_tensors[name] = (
            base_arr.astype(np.float64) + config.lam * merged
        ).astype("<f4")
    return Checkpoint(config=dict(base.config), tensors=out_tensors, version=base.version)


def slerp_merge(a: Checkpoint, b: Checkpoint, t: float, config: MergeConfig) -> Checkpoint:
    """Per-tensor spherical interpolation with linear norm blending.

    Each tensor is flattened; directions are interpolated along the great
    circle between the unit vectors and the magnitude is the linear mix of
    the two norms. Near-parallel tensors (|cos| > ``parallel_threshold``)
    fall back to plain linear interpolation of the raw tensors.
    """
    if not (0.0 <= t <= 1.0):
        raise ContractError(f"interpolation parameter t={t} outside [0, 1]")
    _check_compatible(a, b, "slerp_merge")
    out_tensors = {}
    for name in a.tensors:
        va = a.tensors[name].astype(np.float64).reshape(-1)
        vb = b.tensors[name].astype(np.float64).reshape(-1)
        na, nb = float(np.linalg.norm(va)), float(np.linalg.norm(vb))
        if na == 0.0 or nb == 0.0:
            raise DegenerateTensorError(f"tensor {name!r} has zero norm")
        ua, ub = va / na, vb / nb
        cos = float(np.clip(ua @ ub, -1.0, 1.0))
        if abs(cos) > config.parallel_threshold:
            mixed = (1.0 - t) * va + t * vb
        else:
            omega = math.acos(cos)
            sin_omega = math.sin(omega)
            direction = (math.sin((1.0 - t) * omega) * ua + math.sin(t * omega) * ub) / sin_omega
            mixed = ((1.0 - t) * na + t * nb) * direction
        out_tensors[name] = mixed.reshape(a.tensors[name].shape).astype("<f4")
    return Checkpoint(config=dict(a.config), tensors=out_tensors, version=a.version)


def lerp_merge(a: Checkpoint, b: Checkpoint, t: float) -> Checkpoint:
    """Per-tensor linear interpolation baseline, (1-t)·a + t·b."""
    if not (0.0 <= t <= 1.0):
        raise ContractError(f"interpolation parameter t={t} outside [0, 1]")
    _check_compatible(a, b, "lerp_merge")
    out_tensors = {
        name: ((1.0 - t) * a.tensors[name].astype(np.float64)
               + t * b.tensors[name].astype(np.float64)).astype("<f4")
        for name in a.tensors
    }
    return Checkpoint(config=dict(a.config), tensors=out_tensors, version=a.version)


def ratio_to_t(weight_a: float, weight_b: float) -> float:
    """Map a pair of mixing weights to the interpolation parameter t.

    t is the share of the second model: t = w_b / (w_a + w_b), so a 19:1
    blend favoring the first model gives t = 0.05.
    """
    wa, wb = float(weight_a), float(weight_b)
    if wa < 0 or wb < 0:
        raise ConfigError("mixing weights must be non-negative")
    if wa + wb == 0:
        raise ConfigError("mixing weights must not both be zero")
    return wb / (wa + wb)
