"""Dense tensors backed by NumPy with tape-based reverse-mode differentiation.

Operations record themselves on the active :class:`Tape` only when at least one input
requires a gradient, so inference outside a tape builds no graph at all.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from contextvars import ContextVar, Token
from typing import Any

import numpy as np
import numpy.typing as npt

from src.core._exceptions import ContractError, ShapeError, TokenIndexError
from src.core.numerics.flops import record_flops

DEFAULT_DTYPE = np.float32
ACCUM_DTYPE = np.float64

Array = npt.NDArray[Any]
Index = Any
BackwardFn = Callable[[Array], Sequence[Array | None]]

_active_tape: ContextVar[Tape | None] = ContextVar("active_tape", default=None)


class Node:
    """One executed operation: its inputs, its output and how to push gradients back."""

    __slots__ = ("op", "inputs", "output", "backward_fn", "tape", "index")

    def __init__(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, backward_fn: BackwardFn, tape: Tape):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn
        self.tape = tape
        self.index = -1


class Tape:
    """Ordered record of differentiable operations executed while the tape is active.

    Execution order is a topological order of the graph, so walking the record backwards
    visits every node after all of its consumers.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._tokens: list[Token[Tape | None]] = []

    def __enter__(self) -> Tape:
        self._tokens.append(_active_tape.set(self))
        return self

    def __exit__(self, *exc_info: object) -> None:
        _active_tape.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Node) -> None:
        """Append an executed operation."""
        node.index = len(self.nodes)
        self.nodes.append(node)

    def backward(self, loss: Tensor) -> None:
        """Populate .grad on every requires_grad tensor that loss depends on."""
        if loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        node = loss._node
        if node is None or node.tape is not self:
            raise ContractError("loss was not produced on this tape")

        loss.grad = np.ones_like(loss.data)
        for current in reversed(self.nodes[: node.index + 1]):
            grad_out = current.output.grad
            if grad_out is None:
                continue
            input_grads = current.backward_fn(grad_out)
            for inp, grad in zip(current.inputs, input_grads, strict=True):
                if grad is None or not inp.requires_grad:
                    continue
                grad = np.asarray(grad, dtype=inp.data.dtype)
                if grad.shape != inp.data.shape:
                    raise ShapeError(f"{current.op} backward", grad.shape, inp.data.shape)
                inp.grad = grad.copy() if inp.grad is None else inp.grad + grad


def active_tape() -> Tape | None:
    """The tape currently recording, if any."""
    return _active_tape.get()


def backward(loss: Tensor) -> None:
    """Run reverse-mode differentiation from a scalar loss."""
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._node is not None:
        loss._node.tape.backward(loss)
    elif loss.requires_grad:
        loss.grad = np.ones_like(loss.data)
    else:
        raise ContractError("loss was not produced on an active tape")


class Tensor:
    """N-dimensional float array with an optional gradient."""

    __slots__ = ("data", "grad", "requires_grad", "_node")

    def __init__(self, data: Any, requires_grad: bool = False, dtype: npt.DTypeLike | None = None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is not None:
            arr = np.asarray(data, dtype=dtype)
        elif isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating):
            arr = data
        else:
            arr = np.asarray(data, dtype=DEFAULT_DTYPE)
        self.data: Array = arr
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._node: Node | None = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def dtype(self) -> np.dtype[Any]:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        """Scalar value as a Python float."""
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> Array:
        """The underlying array (not a copy)."""
        return self.data

    def detach(self) -> Tensor:
        """Same data, cut from the graph."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # Operator sugar
    def __add__(self, other: Any) -> Tensor:
        return add(self, other)

    def __radd__(self, other: Any) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Any) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: Any) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: Any) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: Any) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: Any) -> Tensor:
        return div(self, other)

    def __neg__(self) -> Tensor:
        return neg(self)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __getitem__(self, index: Index) -> Tensor:
        return take(self, index)

    def reshape(self, *shape: int) -> Tensor:
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    def transpose(self, *axes: int) -> Tensor:
        return transpose(self, axes)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return mean(self, axis=axis, keepdims=keepdims)


def as_tensor(value: Any, like: Tensor | None = None) -> Tensor:
    """Wrap constants; tensors pass through unchanged."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else DEFAULT_DTYPE
    return Tensor(np.asarray(value, dtype=dtype))


def parameter(
    shape: tuple[int, ...], rng: np.random.Generator, std: float = 0.02, dtype: Any = DEFAULT_DTYPE
) -> Tensor:
    """Gaussian-initialized trainable tensor; std=0 gives zeros."""
    if std == 0.0:
        data = np.zeros(shape, dtype=dtype)
    else:
        data = (rng.standard_normal(shape) * std).astype(dtype)
    return Tensor(data, requires_grad=True)


def ones_parameter(shape: tuple[int, ...], dtype: Any = DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)


def _result(data: Array, inputs: tuple[Tensor, ...], backward_fn: BackwardFn, op: str) -> Tensor:
    tape = _active_tape.get()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(np.asarray(data))
    if needs_grad and tape is not None:
        out.requires_grad = True
        node = Node(op, inputs, out, backward_fn, tape)
        tape.record(node)
        out._node = node
    return out


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _pair(a: Any, b: Any) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


# Elementwise arithmetic
def add(a: Any, b: Any) -> Tensor:
    ta, tb = _pair(a, b)
    return _result(
        ta.data + tb.data,
        (ta, tb),
        lambda g: (_unbroadcast(g, ta.shape), _unbroadcast(g, tb.shape)),
        "add",
    )


def sub(a: Any, b: Any) -> Tensor:
    ta, tb = _pair(a, b)
    return _result(
        ta.data - tb.data,
        (ta, tb),
        lambda g: (_unbroadcast(g, ta.shape), _unbroadcast(-g, tb.shape)),
        "sub",
    )


def mul(a: Any, b: Any) -> Tensor:
    ta, tb = _pair(a, b)
    return _result(
        ta.data * tb.data,
        (ta, tb),
        lambda g: (_unbroadcast(g * tb.data, ta.shape), _unbroadcast(g * ta.data, tb.shape)),
        "mul",
    )


def div(a: Any, b: Any) -> Tensor:
    ta, tb = _pair(a, b)
    return _result(
        ta.data / tb.data,
        (ta, tb),
        lambda g: (
            _unbroadcast(g / tb.data, ta.shape),
            _unbroadcast(-g * ta.data / (tb.data * tb.data), tb.shape),
        ),
        "div",
    )


def neg(x: Tensor) -> Tensor:
    return _result(-x.data, (x,), lambda g: (-g,), "neg")


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    xd = x.data
    inner = _GELU_C * (xd + 0.044715 * xd**3)
    t = np.tanh(inner)
    out = 0.5 * xd * (1.0 + t)

    def backward_fn(g: Array) -> tuple[Array]:
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * xd**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * d_inner),)

    return _result(out.astype(xd.dtype), (x,), backward_fn, "gelu")


def dropout(x: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when p is zero."""
    if p <= 0.0:
        return x
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return mul(x, Tensor(keep))


# Linear algebra
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes; charges 2*m*k*n per matrix."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        batch = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as e:
        raise ShapeError("matmul", a.shape, b.shape) from e

    m, k = a.shape[-2], a.shape[-1]
    n = b.shape[-1]
    record_flops(2 * math.prod(batch) * m * k * n)

    def backward_fn(g: Array) -> tuple[Array, Array]:
        grad_a = g @ np.swapaxes(b.data, -1, -2)
        grad_b = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return _result(np.matmul(a.data, b.data), (a, b), backward_fn, "matmul")


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(int(i) for i in np.argsort(axes))
    return _result(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),), "transpose")


# Reductions, accumulated in float64
def tensor_sum(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    out = np.sum(x.data, axis=axis, dtype=ACCUM_DTYPE, keepdims=keepdims).astype(x.dtype)

    def backward_fn(g: Array) -> tuple[Array]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return _result(out, (x,), backward_fn, "sum")


def mean(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = math.prod(x.shape[a] for a in axes)
    return div(tensor_sum(x, axis=axis, keepdims=keepdims), float(count))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax; the normalizer is summed in float64."""
    shifted = x.data.astype(ACCUM_DTYPE) - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = (e / np.sum(e, axis=axis, keepdims=True)).astype(x.dtype)

    def backward_fn(g: Array) -> tuple[Array]:
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _result(out, (x,), backward_fn, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data.astype(ACCUM_DTYPE) - np.max(x.data, axis=axis, keepdims=True)
    out64 = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    out = out64.astype(x.dtype)

    def backward_fn(g: Array) -> tuple[Array]:
        return (g - np.exp(out64).astype(x.dtype) * np.sum(g, axis=axis, keepdims=True),)

    return _result(out, (x,), backward_fn, "log_softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, epsilon: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then apply gain and bias."""
    if epsilon <= 0:
        raise ContractError(f"layer_norm epsilon must be positive, got {epsilon}")
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise ShapeError("layer_norm", x.shape, gain.shape, bias.shape)

    xd = x.data.astype(ACCUM_DTYPE)
    mu = xd.mean(axis=-1, keepdims=True)
    centered = xd - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + epsilon)
    xhat = centered * inv_std
    out = (xhat * gain.data + bias.data).astype(x.dtype)
    width = x.shape[-1]

    def backward_fn(g: Array) -> tuple[Array, Array, Array]:
        g64 = g.astype(ACCUM_DTYPE)
        dxhat = g64 * gain.data
        grad_x = (inv_std / width) * (
            width * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        grad_gain = (g64 * xhat).reshape(-1, width).sum(axis=0)
        grad_bias = g64.reshape(-1, width).sum(axis=0)
        return grad_x, grad_gain, grad_bias

    return _result(out, (x, gain, bias), backward_fn, "layer_norm")


# Indexing and assembly
def take(x: Tensor, index: Index) -> Tensor:
    """x[index] with NumPy semantics; repeated indices accumulate in the gradient."""

    def backward_fn(g: Array) -> tuple[Array]:
        grad = np.zeros_like(x.data)
        np.add.at(grad, index, g)
        return (grad,)

    return _result(x.data[index], (x,), backward_fn, "take")


def index_update(base: Tensor, index: Index, values: Tensor) -> Tensor:
    """Copy of base with base[index] replaced by values; index must not repeat."""
    out = base.data.copy()
    out[index] = values.data

    def backward_fn(g: Array) -> tuple[Array, Array]:
        grad_base = g.copy()
        grad_base[index] = 0.0
        return grad_base, _unbroadcast(np.asarray(g[index]), values.shape)

    return _result(out, (base, values), backward_fn, "index_update")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = tuple(tensors)
    sizes = [t.shape[axis] for t in parts]
    splits = np.cumsum(sizes)[:-1]
    return _result(
        np.concatenate([t.data for t in parts], axis=axis),
        parts,
        lambda g: tuple(np.split(g, splits, axis=axis)),
        "concat",
    )


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = tuple(tensors)
    return _result(
        np.stack([t.data for t in parts], axis=axis),
        parts,
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(parts))),
        "stack",
    )


# Losses
def masked_nll(log_probs: Tensor, mask: Array) -> Tensor:
    """Mean negative log-likelihood over entries where mask is set."""
    weights = np.asarray(mask, dtype=log_probs.dtype)
    count = float(weights.sum())
    if count > 0:
        weights = weights / count
    return neg(tensor_sum(mul(log_probs, Tensor(weights))))


def cross_entropy(logits: Tensor, targets: Array | Sequence[int], ignore_index: int | None = None) -> Tensor:
    """Mean of -log softmax(logits)[target] over rows; rows whose target is ignore_index are skipped."""
    ids = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or ids.shape != (logits.shape[0],):
        raise ShapeError("cross_entropy", logits.shape, ids.shape)
    vocab_size = logits.shape[1]
    valid = ids != ignore_index if ignore_index is not None else np.ones_like(ids, dtype=bool)
    bad = ids[valid][(ids[valid] < 0) | (ids[valid] >= vocab_size)]
    if bad.size:
        raise TokenIndexError(int(bad[0]), vocab_size)

    safe = np.where(valid, ids, 0)
    picked = take(log_softmax(logits, axis=-1), (np.arange(ids.shape[0]), safe))
    return masked_nll(picked, valid)
