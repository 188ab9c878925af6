"""Reverse-mode autodiff over numpy arrays.

A :class:`Tensor` wraps an ``np.ndarray`` (float32 or float64) and records
the backward rule of the op that produced it.  Calling ``backward()`` on a
scalar loss topologically sorts the graph and accumulates gradients into
``.grad`` of every tensor that requires them.

The op set is exactly what the attention model and its losses need: matmul,
add (with bias-style broadcasting), relu, dropout, masked softmax, scalar
scale, concat, mean, sum, square, log, gather, plus the structural reshape
and swapaxes.  No further broadcasting is supported on purpose.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from manner.errors import (
    ContractError,
    DegenerateInputError,
    DimensionError,
    NonFiniteError,
)

_FLOAT_DTYPES = (np.float32, np.float64)


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"op {op!r} produced non-finite values")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g over the axes that numpy broadcasting added or expanded."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Tensor:
    """A node in the computation graph.

    ``data`` is immutable by convention once wrapped; ops never write to
    their inputs.  ``grad`` is populated by :meth:`backward`.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(
        self,
        data: np.ndarray,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[np.ndarray], None] | None = None,
        requires_grad: bool = False,
        op: str = "leaf",
    ):
        if data.dtype not in _FLOAT_DTYPES:
            raise ContractError(f"tensor dtype must be float32/float64, got {data.dtype}")
        _check_finite(data, op)
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward
        self._op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self._op!r})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # ---- ops as methods -------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, c: float) -> "Tensor":
        return scale(self, c)

    __rmul__ = __mul__

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, scale(other, -1.0))

    def relu(self) -> "Tensor":
        out_data = np.maximum(self.data, 0)
        mask = self.data > 0

        def backward(g: np.ndarray) -> None:
            self._accumulate(g * mask)

        return Tensor(out_data, (self,), backward, op="relu")

    def square(self) -> "Tensor":
        with np.errstate(over="ignore"):
            out_data = self.data * self.data

        def backward(g: np.ndarray) -> None:
            self._accumulate(g * (2.0 * self.data))

        return Tensor(out_data, (self,), backward, op="square")

    def log(self) -> "Tensor":
        with np.errstate(divide="ignore", invalid="ignore"):
            out_data = np.log(self.data)

        def backward(g: np.ndarray) -> None:
            self._accumulate(g / self.data)

        return Tensor(out_data, (self,), backward, op="log")

    def sum(self) -> "Tensor":
        out_data = np.asarray(self.data.sum(), dtype=self.dtype)

        def backward(g: np.ndarray) -> None:
            self._accumulate(np.broadcast_to(g, self.data.shape).copy())

        return Tensor(out_data, (self,), backward, op="sum")

    def mean(self) -> "Tensor":
        n = self.data.size
        out_data = np.asarray(self.data.mean(), dtype=self.dtype)

        def backward(g: np.ndarray) -> None:
            self._accumulate(np.broadcast_to(g / n, self.data.shape).copy())

        return Tensor(out_data, (self,), backward, op="mean")

    def reshape(self, shape: Sequence[int]) -> "Tensor":
        shape = tuple(shape)
        out_data = self.data.reshape(shape)

        def backward(g: np.ndarray) -> None:
            self._accumulate(g.reshape(self.data.shape))

        return Tensor(out_data, (self,), backward, op="reshape")

    def swapaxes(self, a: int, b: int) -> "Tensor":
        out_data = np.ascontiguousarray(self.data.swapaxes(a, b))

        def backward(g: np.ndarray) -> None:
            self._accumulate(g.swapaxes(a, b))

        return Tensor(out_data, (self,), backward, op="swapaxes")

    # ---- backward pass ---------------------------------------------------

    def backward(self) -> None:
        """Backpropagate from a scalar; fills ``.grad`` on reachable tensors."""
        if self.data.size != 1:
            raise ContractError(f"backward requires a scalar loss, got shape {self.shape}")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def leaf(data: np.ndarray | float, requires_grad: bool = False, dtype=None) -> Tensor:
    """Wrap an array as a graph leaf (a parameter when requires_grad)."""
    arr = np.asarray(data, dtype=dtype)
    if arr.dtype not in _FLOAT_DTYPES:
        arr = arr.astype(np.float32)
    return Tensor(arr, requires_grad=requires_grad)


def constant(data: np.ndarray | float, dtype=None) -> Tensor:
    """A leaf that never receives a gradient (targets, inputs)."""
    return leaf(data, requires_grad=False, dtype=dtype)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; broadcasting limited to what numpy allows, with
    gradients summed back over broadcast axes (covers bias adds)."""
    try:
        out_data = a.data + b.data
    except ValueError as e:
        raise DimensionError(f"add: incompatible shapes {a.shape} and {b.shape}") from e

    def backward(g: np.ndarray) -> None:
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, (a, b), backward, op="add")


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    c = float(c)
    out_data = x.data * x.dtype.type(c)

    def backward(g: np.ndarray) -> None:
        x._accumulate(g * x.dtype.type(c))

    return Tensor(out_data, (x,), backward, op="scale")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product.  Both operands 2-D, or both N-D with identical
    leading (batch) dimensions; the product applies to the last two axes."""
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise DimensionError("matmul operands must be at least 2-D")
    if a.data.ndim != b.data.ndim or a.data.shape[:-2] != b.data.shape[:-2]:
        raise DimensionError(
            f"matmul batch dims must match exactly: {a.shape} vs {b.shape}"
        )
    if a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(f"matmul inner dims differ: {a.shape} x {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out_data = a.data @ b.data

    def backward(g: np.ndarray) -> None:
        a._accumulate(g @ b.data.swapaxes(-1, -2))
        b._accumulate(a.data.swapaxes(-1, -2) @ g)

    return Tensor(out_data, (a, b), backward, op="matmul")


def softmax_masked(logits: Tensor, mask: np.ndarray) -> Tensor:
    """Row softmax over the last axis with a boolean keep-mask.

    Masked entries are exactly zero in the output and receive no gradient.
    Rows are stabilized by subtracting the row max over kept entries.
    A fully masked row is a degenerate input.
    """
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), logits.shape)
    if not mask.any(axis=-1).all():
        raise DegenerateInputError("softmax_masked: a row is fully masked")
    x = logits.data
    neg = np.finfo(x.dtype).min
    shifted = np.where(mask, x, neg)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(shifted, dtype=x.dtype), 0)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        # d softmax: p * (g - sum(g * p)); masked entries have p == 0.
        inner = (g * out_data).sum(axis=-1, keepdims=True)
        logits._accumulate(out_data * (g - inner))

    return Tensor(out_data, (logits,), backward, op="softmax_masked")


def dropout(x: Tensor, rate: float, rng: np.random.Generator, train_mode: bool) -> Tensor:
    """Inverted dropout: keep with prob 1-rate and divide by it, so eval mode
    is the identity.  The realized mask is reused in the backward pass."""
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
    if not train_mode or rate == 0.0:
        out_data = x.data

        def backward_id(g: np.ndarray) -> None:
            x._accumulate(g)

        return Tensor(out_data, (x,), backward_id, op="dropout")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
    out_data = x.data * mask

    def backward(g: np.ndarray) -> None:
        x._accumulate(g * mask)

    return Tensor(out_data, (x,), backward, op="dropout")


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    ts = list(tensors)
    out_data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g: np.ndarray) -> None:
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            t._accumulate(g[tuple(idx)])

    return Tensor(out_data, tuple(ts), backward, op="concat")


def gather(x: Tensor, index: np.ndarray) -> Tensor:
    """Pick one entry per row: out[i] = x[i, index[i]] for a 2-D x."""
    if x.data.ndim != 2:
        raise DimensionError("gather expects a 2-D tensor")
    index = np.asarray(index, dtype=np.int64)
    if index.ndim != 1 or index.shape[0] != x.data.shape[0]:
        raise DimensionError("gather index must be 1-D with one entry per row")
    if index.min(initial=0) < 0 or index.max(initial=-1) >= x.data.shape[1]:
        raise IndexError("gather index out of range")
    rows = np.arange(x.data.shape[0])
    out_data = x.data[rows, index]

    def backward(g: np.ndarray) -> None:
        gx = np.zeros_like(x.data)
        np.add.at(gx, (rows, index), g)
        x._accumulate(gx)

    return Tensor(out_data, (x,), backward, op="gather")


def grad(loss: Tensor, params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Backpropagate a scalar loss and return the gradient of every named
    parameter (zeros for parameters the loss does not reach)."""
    loss.backward()
    out = {}
    for name, p in params.items():
        out[name] = p.grad if p.grad is not None else np.zeros_like(p.data)
    return out
