"""Dense-tensor reverse-mode differentiation.

Tensors wrap numpy arrays and record the operations that produced them as
backward closures.  Calling ``backward`` on a scalar loss walks the record in
reverse topological order and accumulates gradients into every reachable
tensor with ``requires_grad`` set.  A record is consumable once: the walk
releases the closures as it goes, and a second call on the same loss raises.

Recording can be switched off with ``no_grad`` (rollouts use this; it skips
all bookkeeping and roughly halves inference cost).
"""
from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ContractError, DimensionError, InputError

DTYPE = np.float64

_node_counter = itertools.count()


class _GradMode:
    enabled = True


class no_grad:
    """Context manager that disables recording of backward closures."""

    def __enter__(self):
        self._prev = _GradMode.enabled
        _GradMode.enabled = False
        return self

    def __exit__(self, *exc):
        _GradMode.enabled = self._prev
        return False


def grad_enabled() -> bool:
    return _GradMode.enabled


class Tensor:
    __slots__ = ("data", "_grad", "requires_grad", "_parents", "_backward", "node_id", "name", "_spent")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=DTYPE)
        self._grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.node_id = next(_node_counter)
        self.name = name
        self._spent = False

    # -- gradient bookkeeping ------------------------------------------------

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value) -> None:
        self._grad = None if value is None else np.asarray(value, dtype=DTYPE)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self._grad is None:
            self._grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g, dtype=DTYPE)
        else:
            self._grad += g

    def reset_grad(self) -> None:
        self._grad = None

    # -- basic introspection ---------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise InputError("tensor-by-tensor division is not supported; multiply by a reciprocal")
        return mul(self, 1.0 / float(other))

    def sum(self, axis=None):
        return tsum(self, axis=axis)

    def mean(self, axis=None):
        return tmean(self, axis=axis)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def square(self):
        return mul(self, self)

    def relu(self):
        return relu(self)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def transpose(self):
        return transpose(self)

    # -- backward pass ---------------------------------------------------------

    def backward(self) -> None:
        """Fill .grad of every reachable requires_grad tensor with d(self)/d(that).

        ``self`` must be scalar.  The computation record is released during the
        walk, so each forward pass supports exactly one backward pass.
        """
        if self.data.size != 1:
            raise ContractError(f"backward requires a scalar loss, got shape {self.data.shape}")
        if self._spent:
            raise ContractError("computation record already consumed by a previous backward call")

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if node.node_id in visited:
                continue
            visited.add(node.node_id)
            stack.append((node, True))
            for parent in node._parents:
                if parent.node_id not in visited:
                    stack.append((parent, False))

        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node._grad)
            node._parents = ()
            node._backward = None
        self._spent = True


def parameter(data, name: str = "") -> Tensor:
    """A leaf tensor that participates in gradient accumulation."""
    return Tensor(data, requires_grad=True, name=name)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out._grad = None
    out.node_id = next(_node_counter)
    out.name = ""
    out._spent = False
    if _GradMode.enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- elementwise and reduction ops ----------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    if not isinstance(b, Tensor) and np.ndim(b) == 0:
        scale = float(b)
        data = a.data * scale

        def backward_scalar(g):
            if a.requires_grad:
                a.accumulate_grad(g * scale)

        return _make(data, (a,), backward_scalar)

    a, b = _wrap(a), _wrap(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad:
            b.accumulate_grad(a.data.T @ g)

    return _make(data, (a, b), backward)


def tsum(a: Tensor, axis=None) -> Tensor:
    data = a.data.sum(axis=axis)

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a.accumulate_grad(np.broadcast_to(g, a.data.shape).copy() if np.ndim(g) == 0 else np.full_like(a.data, g))
        else:
            a.accumulate_grad(np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return _make(np.asarray(data, dtype=DTYPE), (a,), backward)


def tmean(a: Tensor, axis=None) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis), 1.0 / n)


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * (a.data > 0))

    return _make(data, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * (1.0 - data * data))

    return _make(data, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * data * (1.0 - data))

    return _make(data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * data)

    return _make(data, (a,), backward)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g / a.data)

    return _make(data, (a,), backward)


# -- shape ops --------------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)
    src_shape = a.data.shape

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(src_shape))

    return _make(data, (a,), backward)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"transpose expects a 2-D tensor, got {a.data.shape}")
    data = a.data.T.copy()

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g.T)

    return _make(data, (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    if not tensors:
        raise InputError("concat of an empty tensor list")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t.accumulate_grad(g[tuple(sl)])

    return _make(data, tuple(tensors), backward)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)
    data = a.data[sl].copy()

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[sl] = g
            a.accumulate_grad(full)

    return _make(data, (a,), backward)


def pad_last(a: Tensor, width: int) -> Tensor:
    """Zero-pad the last axis up to ``width``."""
    cur = a.data.shape[-1]
    if cur > width:
        raise DimensionError(f"cannot pad last axis of size {cur} down to {width}")
    if cur == width:
        return a
    pads = [(0, 0)] * (a.data.ndim - 1) + [(0, width - cur)]
    data = np.pad(a.data, pads)

    def backward(g):
        if a.requires_grad:
            sl = tuple([slice(None)] * (a.data.ndim - 1) + [slice(0, cur)])
            a.accumulate_grad(g[sl])

    return _make(data, (a,), backward)


def gather_rows(a: Tensor, index) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    data = a.data[index]

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            np.add.at(full, index, g)
            a.accumulate_grad(full)

    return _make(data, (a,), backward)


def segment_sum(a: Tensor, segment_ids, num_segments: int) -> Tensor:
    """Sum rows of ``a`` into ``num_segments`` buckets given per-row ids."""
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    data = np.zeros((num_segments,) + a.data.shape[1:], dtype=DTYPE)
    np.add.at(data, segment_ids, a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g[segment_ids])

    return _make(data, (a,), backward)


def scatter_rows(rows: Tensor, index, num_rows: int) -> Tensor:
    """Place ``rows`` at positions ``index`` of a zero (num_rows, ...) tensor."""
    index = np.asarray(index, dtype=np.int64)
    data = np.zeros((num_rows,) + rows.data.shape[1:], dtype=DTYPE)
    data[index] = rows.data

    def backward(g):
        if rows.requires_grad:
            rows.accumulate_grad(g[index])

    return _make(data, (rows,), backward)


# -- numerically fused ops --------------------------------------------------------


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax over the last axis, numerically stabilised."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * data).sum(axis=-1, keepdims=True)
            a.accumulate_grad((g - dot) * data)

    return _make(data, (a,), backward)


def layer_norm_rows(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-8) -> Tensor:
    """Normalize each row of ``a`` to zero mean / unit variance, then scale and shift."""
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gamma.data + beta.data

    def backward(g):
        n = a.data.shape[-1]
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).reshape(-1, n).sum(axis=0))
        if beta.requires_grad:
            beta.accumulate_grad(g.reshape(-1, n).sum(axis=0))
        if a.requires_grad:
            gx = g * gamma.data
            term = gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            a.accumulate_grad(term * inv)

    return _make(data, (a, gamma, beta), backward)


def dropout(a: Tensor, rate: float, rng, train_mode: bool) -> Tensor:
    """Inverted dropout; the identity map (bit-exact) when not training."""
    if not train_mode or rate <= 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise InputError(f"dropout rate must lie in [0, 1), got {rate}")
    mask = (rng.generator.random(a.data.shape) >= rate) / (1.0 - rate)
    data = a.data * mask

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * mask)

    return _make(data, (a,), backward)


def collect_parameters(obj) -> list[Tensor]:
    """Flatten nested lists/dicts/objects with .parameters() into a tensor list."""
    out: list[Tensor] = []

    def walk(x):
        if isinstance(x, Tensor):
            if x.requires_grad:
                out.append(x)
        elif isinstance(x, dict):
            for v in x.values():
                walk(v)
        elif isinstance(x, (list, tuple)):
            for v in x:
                walk(v)
        elif hasattr(x, "parameters"):
            walk(x.parameters())

    walk(obj)
    return out
