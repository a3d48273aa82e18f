"""Dense float64 tensors with reverse-mode automatic differentiation.

Each op builds its output with :func:`_node`, passing a closure that maps the
output gradient to one gradient per parent (``None`` for parents that do not
need one). :meth:`Tensor.backward` walks the graph in reverse topological
order; only leaves accumulate into ``.grad``, so calling it twice on the same
graph adds the gradients twice.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator, Sequence

import numpy as np

from . import kernels

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate ops without recording the graph."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise FloatingPointError(f"non-finite values in tensor {name or ''}".strip())
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeError(f"backward needs a scalar, got shape {self.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                if id(p) in grads:
                    grads[id(p)] = grads[id(p)] + pg
                else:
                    grads[id(p)] = pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(as_tensor(other), -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.requires_grad = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out._parents = tuple(parents) if out.requires_grad else ()
    out._backward = backward if out.requires_grad else None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"axis {axis} out of range for {ndim}-d tensor")
    return axis % ndim


# --- elementwise -------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"cannot add shapes {a.shape} and {b.shape}") from exc
    return _node(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}") from exc
    return _node(
        data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def scale(a: Tensor, c: float) -> Tensor:
    return _node(a.data * c, (a,), lambda g: (g * c,))


def relu(a: Tensor) -> Tensor:
    pos = a.data > 0
    return _node(np.where(pos, a.data, 0.0), (a,), lambda g: (np.where(pos, g, 0.0),))


# --- linear algebra and shape ------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product with numpy broadcasting over leading axes."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul needs tensors of rank >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    data = np.matmul(a.data, b.data)

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return _node(data, (a, b), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _node(np.ascontiguousarray(a.data.transpose(axes)), (a,), lambda g: (g.transpose(inv),))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ax = _check_axis(axis, tensors[0].ndim)
    try:
        data = np.concatenate([t.data for t in tensors], axis=ax)
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]
    return _node(data, tensors, lambda g: tuple(np.split(g, bounds, axis=ax)))


def sum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    if axis is None:
        return _node(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))
    ax = _check_axis(axis, a.ndim)
    data = a.data.sum(axis=ax, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _node(data, (a,), backward)


def index_select(a: Tensor, idx: np.ndarray) -> Tensor:
    """Rows ``a[idx]`` along axis 0."""
    idx = np.asarray(idx, dtype=np.int64)

    def backward(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _node(a.data[idx], (a,), backward)


def embedding_lookup(table: Tensor, idx: np.ndarray) -> Tensor:
    """``table[idx]`` for an integer index array of any shape."""
    idx = np.asarray(idx, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError("embedding table must be 2-d")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError("embedding index out of range")
    flat = idx.reshape(-1)

    def backward(g):
        g2 = np.ascontiguousarray(g.reshape(-1, table.shape[1]))
        return (kernels.embedding_backward(g2, flat, table.shape[0]),)

    return _node(table.data[idx], (table,), backward)


# --- normalisation ------------------------------------------------------------


def _to_rows(x: np.ndarray, ax: int) -> tuple[np.ndarray, tuple[int, ...]]:
    moved = np.moveaxis(x, ax, -1)
    return np.ascontiguousarray(moved.reshape(-1, moved.shape[-1])), moved.shape


def _from_rows(r: np.ndarray, moved_shape: tuple[int, ...], ax: int) -> np.ndarray:
    return np.moveaxis(r.reshape(moved_shape), -1, ax)


def softmax(a: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along ``axis``; entries where ``mask`` is False get probability 0."""
    ax = _check_axis(axis, a.ndim)
    x2, mshape = _to_rows(a.data, ax)
    if mask is None:
        m2 = np.ones(x2.shape, dtype=np.bool_)
    else:
        m2, _ = _to_rows(np.broadcast_to(np.asarray(mask, dtype=np.bool_), a.shape), ax)
    y2 = kernels.softmax(x2, m2)
    data = np.ascontiguousarray(_from_rows(y2, mshape, ax))

    def backward(g):
        g2, _ = _to_rows(g, ax)
        return (_from_rows(kernels.softmax_backward(y2, g2), mshape, ax),)

    return _node(data, (a,), backward)


def layer_norm(a: Tensor, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """Zero-mean, unit-variance normalisation along ``axis`` (no affine terms)."""
    ax = _check_axis(axis, a.ndim)
    x2, mshape = _to_rows(a.data, ax)
    y2, inv = kernels.layer_norm(x2, eps)
    data = np.ascontiguousarray(_from_rows(y2, mshape, ax))

    def backward(g):
        g2, _ = _to_rows(g, ax)
        return (_from_rows(kernels.layer_norm_backward(y2, inv, g2), mshape, ax),)

    return _node(data, (a,), backward)


# --- edge-class gather / scatter ---------------------------------------------


def class_gather(x: Tensor, E: np.ndarray) -> Tensor:
    """``out[b,h,i,j] = x[b,h,i,E[b,i,j]]``: pick a per-class score for every pair."""
    E = np.ascontiguousarray(E, dtype=np.int64)
    if x.ndim != 4 or E.ndim != 3 or x.shape[0] != E.shape[0] or x.shape[2] != E.shape[1]:
        raise ShapeError(f"class_gather shapes {x.shape} and {E.shape} incompatible")
    n_classes = x.shape[3]
    if E.size and (E.min() < 0 or E.max() >= n_classes):
        raise IndexError("edge class out of range")
    xd = np.ascontiguousarray(x.data)
    data = kernels.class_gather(xd, E)
    return _node(data, (x,), lambda g: (kernels.class_scatter(np.ascontiguousarray(g), E, n_classes),))


def class_scatter(y: Tensor, E: np.ndarray, n_classes: int) -> Tensor:
    """``out[b,h,i,c] = sum_j y[b,h,i,j] [E[b,i,j] == c]``; adjoint of :func:`class_gather`."""
    E = np.ascontiguousarray(E, dtype=np.int64)
    if y.ndim != 4 or E.ndim != 3 or y.shape[0] != E.shape[0] or y.shape[2:] != E.shape[1:]:
        raise ShapeError(f"class_scatter shapes {y.shape} and {E.shape} incompatible")
    if E.size and (E.min() < 0 or E.max() >= n_classes):
        raise IndexError("edge class out of range")
    data = kernels.class_scatter(np.ascontiguousarray(y.data), E, n_classes)
    return _node(data, (y,), lambda g: (kernels.class_gather(np.ascontiguousarray(g), E),))


# --- loss ---------------------------------------------------------------------


def log_softmax_np(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def masked_cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray | None = None) -> Tensor:
    """Mean negative log-likelihood of ``targets`` over positions where ``mask`` holds.

    ``logits`` has shape ``(..., C)``; ``targets`` and ``mask`` have shape ``(...)``.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if logits.shape[:-1] != targets.shape:
        raise ShapeError(f"logits {logits.shape} do not match targets {targets.shape}")
    mask = np.ones(targets.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("cross-entropy over an empty mask")
    safe_t = np.where(mask, targets, 0)
    logp = log_softmax_np(logits.data)
    picked = np.take_along_axis(logp, safe_t[..., None], axis=-1)[..., 0]
    loss = -(picked * mask).sum() / count
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite cross-entropy")

    def backward(g):
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        np.put_along_axis(onehot, safe_t[..., None], 1.0, axis=-1)
        return (g * (p - onehot) * (mask[..., None] / count),)

    return _node(np.asarray(loss), (logits,), backward)
