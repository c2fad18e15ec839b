"""Minimal reverse-mode autodiff over numpy arrays.

Values are stored in float32 by default (switchable via `using_dtype`, mainly
so gradient checks can run the whole graph in float64); reductions always
accumulate in float64. Every op validates shapes up front and rejects
non-finite values instead of letting them propagate.

The graph is the linked structure of op records hanging off each output
tensor; creation order is a topological order, and `backward` walks the
reachable records exactly once in reverse creation order. A graph is consumed
by `backward`; reusing it raises `GraphConsumedError`.
"""

from __future__ import annotations

import contextlib
import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "GraphConsumedError",
    "NumericsError",
    "ShapeError",
    "backward",
    "concat",
    "conv1d_dilated",
    "default_dtype",
    "dropout",
    "gather_rows",
    "l2_norm",
    "matmul",
    "no_grad",
    "softmax",
    "tensor",
    "using_dtype",
    "zero_grad",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested op."""


class NumericsError(FloatingPointError):
    """A NaN or Inf appeared in a forward value or a gradient."""


class GraphConsumedError(RuntimeError):
    """backward() was called on a graph that has already been consumed."""


_DTYPE = np.float32
_GRAD_ENABLED = True
_ids = itertools.count()


def default_dtype() -> np.dtype:
    return np.dtype(_DTYPE)


@contextlib.contextmanager
def using_dtype(dtype):
    """Temporarily switch the storage dtype for newly created tensors."""
    global _DTYPE
    prev = _DTYPE
    _DTYPE = np.dtype(dtype).type
    try:
        yield
    finally:
        _DTYPE = prev


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (inference paths)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _ensure_finite(name: str, arr: np.ndarray) -> np.ndarray:
    # fast path: a finite float64 sum certifies every entry; a non-finite sum
    # may be accumulator overflow, so only then pay for the exact scan
    total = arr.sum(dtype=np.float64)
    if not np.isfinite(total) and not np.isfinite(arr).all():
        raise NumericsError(f"non-finite values produced by '{name}' (shape {arr.shape})")
    return arr


class _Record:
    """One op record: parents plus the vector-Jacobian product closure."""

    __slots__ = ("op", "parents", "vjp")

    def __init__(self, op: str, parents: tuple["Tensor", ...], vjp: Callable):
        self.op = op
        self.parents = parents
        self.vjp = vjp


class Tensor:
    """A numpy array plus an optional gradient buffer and graph linkage."""

    __slots__ = ("data", "requires_grad", "grad", "_rec", "_consumed", "_id")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=_DTYPE)
        _ensure_finite("tensor", arr)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._rec: _Record | None = None
        self._consumed = False
        self._id = next(_ids)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            return _add(self, other)
        return _add_scalar(self, float(other))

    __radd__ = __add__

    def __neg__(self):
        return _mul_scalar(self, -1.0)

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return _add(self, -other)
        return _add_scalar(self, -float(other))

    def __rsub__(self, other):
        return _add_scalar(-self, float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return _mul(self, other)
        return _mul_scalar(self, float(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def relu(self) -> "Tensor":
        return _relu(self)

    def sigmoid(self) -> "Tensor":
        return _sigmoid(self)

    def log(self) -> "Tensor":
        return _log(self)

    def clip(self, lo: float, hi: float) -> "Tensor":
        return _clip(self, lo, hi)

    def sum(self, axis: int | None = None) -> "Tensor":
        return _reduce(self, axis, kind="sum")

    def mean(self, axis: int | None = None) -> "Tensor":
        return _reduce(self, axis, kind="mean")

    def reshape(self, *shape: int) -> "Tensor":
        return _reshape(self, shape)

    @property
    def T(self) -> "Tensor":
        return _transpose(self)

    def backward(self) -> None:
        backward(self)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _from_op(op: str, data: np.ndarray, parents: tuple[Tensor, ...], vjp: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = _ensure_finite(op, np.asarray(data, dtype=_DTYPE))
    out.requires_grad = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out.grad = None
    out._rec = _Record(op, parents, vjp) if out.requires_grad else None
    out._consumed = False
    out._id = next(_ids)
    return out


# -- elementwise and structural ops -------------------------------------------


def _add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape == b.shape:
        return _from_op("add", a.data + b.data, (a, b), lambda g: (g, g))
    # row-broadcast bias: (T, d) + (d,)
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        vjp = lambda g: (g, np.sum(g, axis=0, dtype=np.float64).astype(g.dtype))
        return _from_op("add", a.data + b.data, (a, b), vjp)
    raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")


def _add_scalar(a: Tensor, c: float) -> Tensor:
    return _from_op("add_scalar", a.data + np.asarray(c, dtype=_DTYPE), (a,), lambda g: (g,))


def _mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    vjp = lambda g: (g * b.data, g * a.data)
    return _from_op("mul", a.data * b.data, (a, b), vjp)


def _mul_scalar(a: Tensor, c: float) -> Tensor:
    c = np.asarray(c, dtype=_DTYPE)
    return _from_op("mul_scalar", a.data * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two rank-2 tensors."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: expected rank-2 operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree, {a.shape} @ {b.shape}")
    vjp = lambda g: (g @ b.data.T, a.data.T @ g)
    return _from_op("matmul", a.data @ b.data, (a, b), vjp)


def _relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _from_op("relu", np.where(mask, a.data, 0), (a,), lambda g: (g * mask,))


def _sigmoid(a: Tensor) -> Tensor:
    # stable: exp(-|x|) never overflows
    z = np.exp(-np.abs(a.data.astype(np.float64)))
    out = np.where(a.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    vjp = lambda g: (g * (out * (1.0 - out)).astype(g.dtype),)
    return _from_op("sigmoid", out, (a,), vjp)


def _log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise NumericsError("log: non-positive input")
    return _from_op("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def _clip(a: Tensor, lo: float, hi: float) -> Tensor:
    mask = (a.data >= lo) & (a.data <= hi)
    return _from_op("clip", np.clip(a.data, lo, hi), (a,), lambda g: (g * mask,))


def dropout(a: Tensor, p: float, train: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when not training. The mask is saved for backward."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: p must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return a
    scale = (rng.random(a.shape) >= p).astype(a.data.dtype) / (1.0 - p)
    return _from_op("dropout", a.data * scale, (a,), lambda g: (g * scale,))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data.astype(np.float64) - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def vjp(g):
        s = out.astype(g.dtype)
        return (s * (g - np.sum(g * s, axis=axis, keepdims=True)),)

    return _from_op("softmax", out, (a,), vjp)


def _reduce(a: Tensor, axis: int | None, kind: str) -> Tensor:
    if axis not in (None, 0):
        raise ShapeError(f"{kind}: only full or axis-0 reductions are supported")
    n = a.data.size if axis is None else a.shape[0]
    if n == 0:
        raise ShapeError(f"{kind}: empty reduction")
    total = np.sum(a.data, axis=axis, dtype=np.float64)
    if kind == "mean":
        total = total / n
    scale = 1.0 / n if kind == "mean" else 1.0

    def vjp(g):
        if axis is None:
            return (np.full(a.shape, g * scale, dtype=a.data.dtype),)
        return (np.broadcast_to(g * scale, a.shape).astype(a.data.dtype),)

    return _from_op(kind, total, (a,), vjp)


def l2_norm(a: Tensor) -> Tensor:
    """Euclidean norm of all entries, as a scalar tensor."""
    sq = np.sum(np.square(a.data, dtype=np.float64))
    norm = np.sqrt(sq)

    def vjp(g):
        if norm == 0.0:
            return (np.zeros_like(a.data),)
        return ((g * (a.data / norm)).astype(a.data.dtype),)

    return _from_op("l2_norm", norm, (a,), vjp)


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows of a rank-2 tensor; backward scatter-adds into the source."""
    if a.ndim != 2:
        raise ShapeError(f"gather_rows: expected rank-2 input, got {a.shape}")
    idx = np.asarray(idx, dtype=np.intp)

    def vjp(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _from_op("gather_rows", a.data[idx], (a,), vjp)


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not parts:
        raise ShapeError("concat: no operands")
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
            for i in range(len(parts))
        )

    return _from_op("concat", np.concatenate([p.data for p in parts], axis=axis), tuple(parts), vjp)


def _reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _from_op("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def _transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose: expected rank-2 input, got {a.shape}")
    return _from_op("transpose", a.data.T.copy(), (a,), lambda g: (g.T,))


def conv1d_dilated(x: Tensor, w: Tensor, dilation: int = 1) -> Tensor:
    """Temporal cross-correlation with holes, zero-padded to preserve length.

    x is (T, c_in), w is (k, c_in, c_out) with k odd; output is (T, c_out).
    """
    if x.ndim != 2 or w.ndim != 3:
        raise ShapeError(f"conv1d_dilated: expected (T,c_in) and (k,c_in,c_out), got {x.shape}, {w.shape}")
    k, c_in, _ = w.shape
    if k % 2 == 0:
        raise ShapeError(f"conv1d_dilated: kernel size must be odd, got {k}")
    if dilation < 1:
        raise ValueError(f"conv1d_dilated: dilation must be >= 1, got {dilation}")
    if x.shape[1] != c_in:
        raise ShapeError(f"conv1d_dilated: channel mismatch, x has {x.shape[1]}, w expects {c_in}")

    t_len = x.shape[0]
    pad = (k - 1) // 2 * dilation
    xpad = np.zeros((t_len + 2 * pad, c_in), dtype=x.data.dtype)
    xpad[pad : pad + t_len] = x.data
    # windows[j] is the input slice seen by tap j: shape (k, T, c_in)
    windows = np.stack([xpad[j * dilation : j * dilation + t_len] for j in range(k)])
    out = np.einsum("jti,jio->to", windows, w.data)

    def vjp(g):
        gw = np.einsum("jti,to->jio", windows, g)
        gwin = np.einsum("to,jio->jti", g, w.data)
        gpad = np.zeros_like(xpad)
        for j in range(k):
            gpad[j * dilation : j * dilation + t_len] += gwin[j]
        return (gpad[pad : pad + t_len], gw)

    return _from_op("conv1d_dilated", out, (x, w), vjp)


def custom_op(op: str, data: np.ndarray, parents: tuple[Tensor, ...], vjp: Callable) -> Tensor:
    """Wire an externally computed forward value into the graph.

    vjp receives the output gradient and must return one gradient (or None)
    per parent.
    """
    return _from_op(op, data, parents, vjp)


# -- backward ------------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Populate .grad on every requires_grad tensor reachable from `loss`.

    Gradients accumulate additively across fan-out and across calls (clear
    with `zero_grad`). The traversed records are consumed.
    """
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("backward: loss does not require grad")

    nodes: list[Tensor] = []
    seen: set[int] = set()
    stack = [loss]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node._consumed:
            raise GraphConsumedError(
                "backward: graph already consumed; run a new forward pass first"
            )
        nodes.append(node)
        if node._rec is not None:
            stack.extend(node._rec.parents)

    nodes.sort(key=lambda t: t._id, reverse=True)
    loss.grad = np.ones_like(loss.data)
    for node in nodes:
        rec = node._rec
        if rec is None:
            continue
        grads = rec.vjp(node.grad)
        for parent, g in zip(rec.parents, grads):
            if g is None or not parent.requires_grad:
                continue
            _ensure_finite(f"grad[{rec.op}]", np.asarray(g))
            if parent.grad is None:
                parent.grad = np.array(g, dtype=parent.data.dtype, copy=True)
            else:
                parent.grad = parent.grad + g.astype(parent.data.dtype)
        node._consumed = True
        node._rec = None


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
