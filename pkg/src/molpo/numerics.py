"""Dense float64 tensors with reverse-mode automatic differentiation.

The whole toolkit trains against this module: a small set of primitive ops on
numpy arrays, each recording its inputs and a backward rule onto an explicit
gradient tape. Design constraints, enforced here rather than assumed:

* every primitive checks its output for NaN/inf and raises NumericError —
  divergence is surfaced where it happens, not three modules later;
* a tape is single-use: the second backward() on the same tape raises
  StateError;
* gradients accumulate by summation over all paths, and leaves that do not
  reach the root receive explicit zero gradients;
* batch reductions are sequential left-to-right, so repeated runs of the same
  program produce bit-identical floats.

Ops only record while a tape is active (``with GradTape() as tape: ...``), so
running the same code outside a tape — or inside ``no_record()`` — is the
detach mechanism used for frozen reference models.
"""

from __future__ import annotations

import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericError, StateError

__all__ = [
    "Tensor",
    "GradTape",
    "no_record",
    "tensor",
    "add",
    "sub",
    "mul",
    "scale",
    "shift",
    "neg",
    "matmul",
    "transpose",
    "gather_rows",
    "concat",
    "log_softmax",
    "sigmoid",
    "softplus",
    "log",
    "exp",
    "power",
    "reduce_sum",
    "reduce_mean",
    "AdamState",
    "adam_step",
    "grad_check",
]


class Tensor:
    """A float64 numpy array plus a requires-grad flag.

    Tensors are hashable by identity (no __eq__ override) so they can key the
    gradient dict returned by ``GradTape.backward``.
    """

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError("tensor initialized with non-finite values")
        self.data = arr
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Convenience operators; constants go through scale()/shift() explicitly.
    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __neg__(self) -> "Tensor":
        return neg(self)


def tensor(data, requires_grad: bool = False) -> Tensor:
    """Build a Tensor from any array-like (copies into float64)."""
    return Tensor(data, requires_grad=requires_grad)


@dataclass
class _Node:
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], tuple]  # grad wrt output -> grads wrt inputs


_ACTIVE = threading.local()


def _tape_stack() -> list:
    stack = getattr(_ACTIVE, "stack", None)
    if stack is None:
        stack = []
        _ACTIVE.stack = stack
    return stack


def _active_tape() -> "GradTape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class _NoRecord:
    """Context manager that suspends recording on all tapes (detach)."""

    def __enter__(self):
        _tape_stack().append(None)
        return self

    def __exit__(self, *exc):
        _tape_stack().pop()
        return False


def no_record() -> _NoRecord:
    """Suspend gradient recording inside a ``with`` block."""
    return _NoRecord()


class GradTape:
    """Records primitive ops for one reverse pass.

    Use as a context manager; ops executed in the block whose inputs require
    gradients are recorded. ``backward(root)`` then returns a dict mapping
    each recorded leaf Tensor to its gradient array. The tape is spent
    afterwards; a second backward raises StateError.
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._leaves: dict[int, Tensor] = {}
        self._outputs: set[int] = set()
        self._spent = False

    def __enter__(self) -> "GradTape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> bool:
        popped = _tape_stack().pop()
        if popped is not self:  # pragma: no cover - misuse guard
            raise StateError("tape context exited out of order")
        return False

    def _record(self, node: _Node) -> None:
        if self._spent:
            raise StateError("cannot record onto a spent tape")
        for t in node.inputs:
            if t.requires_grad and id(t) not in self._outputs:
                self._leaves.setdefault(id(t), t)
        self._outputs.add(id(node.output))
        self._nodes.append(node)

    def backward(self, root: Tensor) -> dict[Tensor, np.ndarray]:
        """Reverse pass from a scalar root; returns grads for every leaf."""
        if self._spent:
            raise StateError("tape already consumed by a previous backward()")
        if root.data.size != 1:
            raise ContractError(f"backward root must be scalar, got shape {root.data.shape}")
        self._spent = True

        grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for node in reversed(self._nodes):
            g_out = grads.pop(id(node.output), None)
            if g_out is None:
                continue
            in_grads = node.backward(g_out)
            for t, g in zip(node.inputs, in_grads):
                if g is None or not t.requires_grad:
                    continue
                if not np.all(np.isfinite(g)):
                    raise NumericError("non-finite gradient during backward pass")
                acc = grads.get(id(t))
                grads[id(t)] = g if acc is None else acc + g

        return {
            leaf: grads.get(key, np.zeros_like(leaf.data))
            for key, leaf in self._leaves.items()
        }


def _emit(op: str, out_data: np.ndarray, inputs: tuple[Tensor, ...], backward) -> Tensor:
    if not np.all(np.isfinite(out_data)):
        raise NumericError(f"op {op!r} produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.requires_grad = any(t.requires_grad for t in inputs)
    tape = _active_tape()
    if tape is not None and out.requires_grad:
        tape._record(_Node(inputs=inputs, output=out, backward=backward))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _emit("add", out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _emit("sub", out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def backward(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _emit("mul", out, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = a.data * c

    def backward(g):
        return (g * c,)

    return _emit("scale", out, (a,), backward)


def shift(a: Tensor, c: float) -> Tensor:
    out = a.data + float(c)

    def backward(g):
        return (g,)

    return _emit("shift", out, (a,), backward)


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ContractError("matmul operands must be 2-D")
    out = a.data @ b.data

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _emit("matmul", out, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ContractError("transpose expects a 2-D tensor")
    out = a.data.T.copy()

    def backward(g):
        return (g.T,)

    return _emit("transpose", out, (a,), backward)


def gather_rows(a: Tensor, indices: Sequence[int]) -> Tensor:
    """Select rows of a 2-D tensor; backward scatter-adds into the source."""
    if a.data.ndim != 2:
        raise ContractError("gather_rows expects a 2-D tensor")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ContractError("gather_rows indices must be 1-D")
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[0]):
        raise ContractError("gather_rows index out of range")
    out = a.data[idx]

    def backward(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, idx, g)
        return (acc,)

    return _emit("gather_rows", out, (a,), backward)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ContractError("concat of zero tensors")
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def backward(g):
        splits = np.cumsum(sizes)[:-1]
        return tuple(np.split(g, splits, axis=axis))

    return _emit("concat", out, tuple(parts), backward)


def log_softmax(a: Tensor) -> Tensor:
    """Log-softmax over the last axis, stabilized by max subtraction."""
    x = a.data
    m = x.max(axis=-1, keepdims=True)
    z = x - m
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse

    def backward(g):
        soft = np.exp(out)
        return (g - soft * g.sum(axis=-1, keepdims=True),)

    return _emit("log_softmax", out, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        return (g * out * (1.0 - out),)

    return _emit("sigmoid", out, (a,), backward)


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(x)), evaluated stably; softplus(-z) is -log sigmoid(z)."""
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))

    def backward(g):
        s = np.empty_like(x)
        pos = x >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        s[~pos] = ex / (1.0 + ex)
        return (g * s,)

    return _emit("softplus", out, (a,), backward)


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)

    def backward(g):
        return (g / a.data,)

    return _emit("log", out, (a,), backward)


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return _emit("exp", out, (a,), backward)


def power(a: Tensor, p: float) -> Tensor:
    p = float(p)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.power(a.data, p)

    def backward(g):
        return (g * p * np.power(a.data, p - 1.0),)

    return _emit("power", out, (a,), backward)


def _reduce(a: Tensor, axis, keepdims: bool, kind: str) -> Tensor:
    x = a.data
    if kind == "sum":
        out = x.sum(axis=axis, keepdims=keepdims)
        denom = 1.0
    else:
        out = x.mean(axis=axis, keepdims=keepdims)
        denom = float(x.size if axis is None else x.shape[axis])
    out = np.asarray(out)

    def backward(g):
        g = np.asarray(g)
        if axis is None:
            grad = np.broadcast_to(g, x.shape).copy()
        else:
            g_exp = g if keepdims else np.expand_dims(g, axis)
            grad = np.broadcast_to(g_exp, x.shape).copy()
        return (grad / denom,)

    return _emit(kind, out, (a,), backward)


def reduce_sum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    return _reduce(a, axis, keepdims, "sum")


def reduce_mean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    return _reduce(a, axis, keepdims, "mean")


@dataclass
class AdamState:
    """Optimizer state for bias-corrected Adam, keyed by parameter name."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    state: AdamState,
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
) -> None:
    """Apply one in-place Adam update.

    Parameters missing from ``grads`` are treated as having zero gradient.
    Iteration is over sorted names so the update order never depends on dict
    construction history.
    """
    if state.t < 0:
        raise ContractError("Adam step counter must be >= 0")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for name in sorted(params):
        p = params[name]
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ContractError(
                f"gradient shape {g.shape} does not match parameter {name!r} {p.data.shape}"
            )
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        if not np.all(np.isfinite(update)):
            raise NumericError(f"non-finite Adam update for parameter {name!r}")
        p.data -= update


def grad_check(
    f: Callable[[dict[str, Tensor]], Tensor],
    params: dict[str, Tensor],
    h: float = 1e-5,
) -> float:
    """Compare tape gradients of ``f`` against central finite differences.

    ``f`` must be a deterministic scalar-valued function of ``params``. Each
    parameter coordinate is perturbed by ±h (in place, then restored) and the
    resulting slope is compared with the analytic gradient. Returns the
    maximum relative error  |fd - an| / max(1, |fd|, |an|)  over all
    coordinates.
    """
    if h <= 0:
        raise ContractError("finite-difference step h must be positive")

    with GradTape() as tape:
        out = f(params)
    if not isinstance(out, Tensor) or out.data.size != 1:
        raise ContractError("grad_check target must return a scalar Tensor")
    analytic = tape.backward(out)

    worst = 0.0
    for name in sorted(params):
        p = params[name]
        an = analytic.get(p)
        if an is None:
            an = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        an_flat = an.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            with no_record():
                hi = float(f(params).data.reshape(()))
            flat[i] = orig - h
            with no_record():
                lo = float(f(params).data.reshape(()))
            flat[i] = orig
            fd = (hi - lo) / (2.0 * h)
            if not np.isfinite(fd):
                raise NumericError("non-finite finite-difference estimate")
            err = abs(fd - an_flat[i]) / max(1.0, abs(fd), abs(an_flat[i]))
            if err > worst:
                worst = err
    return worst
