"""Minimal dense-tensor library with reverse-mode automatic differentiation.

Tensors wrap numpy arrays (float32 by default, float64 for verification).
Operations executed inside a ``with Tape():`` block record themselves; calling
:func:`backward` on a scalar result replays the tape in exact reverse order of
execution and accumulates gradients into every ``requires_grad`` tensor that
is reachable from the loss.  Outside a tape, the same functions behave as
plain (non-recording) numpy math, which is what inference uses.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested operation."""


class NumericError(ValueError):
    """Non-finite input where finite values are required."""


class TapeError(RuntimeError):
    """Backward invoked on a stale, consumed, or absent tape."""


class TableLookupError(IndexError):
    """Embedding index outside the table extent."""


_state = threading.local()


def _tape_stack() -> list:
    if not hasattr(_state, "tapes"):
        _state.tapes = []
    return _state.tapes


def active_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of executed operations for one backward replay.

    Execution order is a topological order of the forward graph, so the
    backward pass simply walks the record in reverse.  A tape may be consumed
    by :func:`backward` exactly once.
    """

    def __init__(self) -> None:
        self.nodes: list[_Node] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)


class _Node:
    __slots__ = ("out", "inputs")

    def __init__(self, out: "Tensor", inputs: list[tuple["Tensor", Callable]]):
        self.out = out
        self.inputs = inputs


class Tensor:
    """Dense row-major tensor with an optional gradient accumulator."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_tape")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{tag})"

    # operator sugar; the module-level functions are the canonical surface
    def __add__(self, other):
        return add(self, _coerce(other, self))

    def __radd__(self, other):
        return add(_coerce(other, self), self)

    def __sub__(self, other):
        return sub(self, _coerce(other, self))

    def __rsub__(self, other):
        return sub(_coerce(other, self), self)

    def __mul__(self, other):
        return mul(self, _coerce(other, self))

    def __rmul__(self, other):
        return mul(_coerce(other, self), self)

    def __truediv__(self, other):
        return div(self, _coerce(other, self))

    def __neg__(self):
        return mul(self, _coerce(-1.0, self))

    def __matmul__(self, other):
        return matmul(self, other)


def _coerce(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


def _record(out: Tensor, inputs: Sequence[tuple[Tensor, Callable]]) -> Tensor:
    tape = active_tape()
    grads_needed = [(t, vjp) for t, vjp in inputs if t.requires_grad]
    if tape is not None and grads_needed:
        out.requires_grad = True
        out._tape = tape
        tape.nodes.append(_Node(out, grads_needed))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    out = Tensor(a.data + b.data)
    return _record(out, [
        (a, lambda g: _unbroadcast(g, a.shape)),
        (b, lambda g: _unbroadcast(g, b.shape)),
    ])


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    out = Tensor(a.data - b.data)
    return _record(out, [
        (a, lambda g: _unbroadcast(g, a.shape)),
        (b, lambda g: _unbroadcast(-g, b.shape)),
    ])


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")
    out = Tensor(a.data * b.data)
    return _record(out, [
        (a, lambda g: _unbroadcast(g * b.data, a.shape)),
        (b, lambda g: _unbroadcast(g * a.data, b.shape)),
    ])


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "div")
    out = Tensor(a.data / b.data)
    return _record(out, [
        (a, lambda g: _unbroadcast(g / b.data, a.shape)),
        (b, lambda g: _unbroadcast(-g * a.data / (b.data * b.data), b.shape)),
    ])


def sqrt(a: Tensor) -> Tensor:
    root = np.sqrt(a.data)
    out = Tensor(root)
    return _record(out, [(a, lambda g: g * (0.5 / root))])


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0))
    return _record(out, [(a, lambda g: g * (a.data > 0))])


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y)
    return _record(out, [(a, lambda g: g * (1.0 - y * y))])


# ---------------------------------------------------------------------------
# linear algebra and structure

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    try:
        out_data = a.data @ b.data
    except ValueError:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    out = Tensor(out_data)
    return _record(out, [
        (a, lambda g: _unbroadcast(g @ b.data.swapaxes(-1, -2), a.shape)),
        (b, lambda g: _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.shape)),
    ])


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    out = Tensor(a.data.reshape(shape))
    return _record(out, [(a, lambda g: g.reshape(a.shape))])


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = Tensor(a.data.transpose(axes))
    return _record(out, [(a, lambda g: g.transpose(inverse))])


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ShapeError("concat: need at least one tensor")
    base = tensors[0].shape
    for t in tensors[1:]:
        if len(t.shape) != len(base):
            raise ShapeError(f"concat: ranks differ, {base} vs {t.shape}")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    ax = axis if axis >= 0 else out.ndim + axis
    offsets = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def make_vjp(i: int):
        lo, hi = offsets[i], offsets[i + 1]
        def vjp(g):
            index = [slice(None)] * g.ndim
            index[ax] = slice(lo, hi)
            return g[tuple(index)]
        return vjp

    return _record(out, [(t, make_vjp(i)) for i, t in enumerate(tensors)])


def tsum(a: Tensor, axis: int | tuple | None = None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, a.shape).astype(a.data.dtype, copy=False)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, a.shape).astype(a.data.dtype, copy=False)

    return _record(out, [(a, vjp)])


def tmean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), _coerce(1.0 / count, a))


def embedding_lookup(table: Tensor, indices) -> Tensor:
    """Row gather from a 2-D table; gradient scatters one-hot row updates."""
    if table.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-D, got {table.shape}")
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise TableLookupError(
            f"embedding index out of range [0, {table.shape[0]}): "
            f"min={idx.min()}, max={idx.max()}")
    out = Tensor(table.data[idx])

    def vjp(g):
        dtable = np.zeros_like(table.data)
        np.add.at(dtable, idx.reshape(-1), g.reshape(-1, table.shape[1]))
        return dtable

    return _record(out, [(table, vjp)])


# ---------------------------------------------------------------------------
# normalization and loss

def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax: rows along ``axis`` sum to 1."""
    if np.isnan(a.data).any():
        raise NumericError("softmax: input contains NaN")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y)

    def vjp(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return y * (g - dot)

    return _record(out, [(a, vjp)])


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then affine."""
    d = a.shape[-1]
    if d < 2:
        raise ShapeError(f"layer_norm: last-axis extent must be >= 2, got {a.shape}")
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm: gain/bias must have shape ({d},), got {gain.shape}/{bias.shape}")
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor(gain.data * xhat + bias.data)
    batch_axes = tuple(range(a.ndim - 1))

    def vjp_a(g):
        dxhat = g * gain.data
        term = dxhat - dxhat.mean(axis=-1, keepdims=True) \
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        return inv * term

    return _record(out, [
        (a, vjp_a),
        (gain, lambda g: (g * xhat).sum(axis=batch_axes)),
        (bias, lambda g: g.sum(axis=batch_axes)),
    ])


def huber_loss(pred: Tensor, target: Tensor, delta: float = 1.0) -> Tensor:
    """Mean elementwise Huber loss: quadratic within ``delta``, linear beyond."""
    if pred.shape != target.shape:
        raise ShapeError(f"huber_loss: shapes {pred.shape} and {target.shape} differ")
    if delta <= 0:
        raise ValueError(f"huber_loss: delta must be > 0, got {delta}")
    e = pred.data - target.data
    abs_e = np.abs(e)
    quad = abs_e <= delta
    elt = np.where(quad, 0.5 * e * e, delta * (abs_e - 0.5 * delta))
    out = Tensor(elt.mean(dtype=pred.data.dtype))
    n = pred.size
    clipped = np.clip(e, -delta, delta)

    def vjp_pred(g):
        return (g * clipped / n).astype(pred.data.dtype, copy=False)

    def vjp_target(g):
        return (-g * clipped / n).astype(pred.data.dtype, copy=False)

    return _record(out, [(pred, vjp_pred), (target, vjp_target)])


# ---------------------------------------------------------------------------
# backward

def backward(loss: Tensor) -> None:
    """Accumulate gradients of ``loss`` into every reachable parameter.

    The tape that recorded ``loss`` is consumed; a second call raises.
    """
    if loss.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    tape = loss._tape
    if tape is None:
        raise TapeError("backward: loss was not recorded on an active tape")
    if tape.consumed:
        raise TapeError("backward: tape already consumed; rebuild the forward pass")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        g = node.out.grad
        if g is None:
            continue
        for tensor, vjp in node.inputs:
            contrib = vjp(g)
            if tensor.grad is None:
                tensor.grad = np.array(contrib, dtype=tensor.data.dtype, copy=True)
            else:
                tensor.grad = tensor.grad + contrib
    tape.consumed = True


def numeric_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray,
                     h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, the verification oracle."""
    # copy: the probe must never alias arrays the objective also reads
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = fn(x)
        flat[i] = orig - h
        lo = fn(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * h)
    return grad
