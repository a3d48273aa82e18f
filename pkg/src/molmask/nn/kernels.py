"""Hot numeric kernels with numba and pure-numpy implementations.

The backend is chosen once at import from ``MOLMASK_BACKEND`` (``numba`` or
``numpy``); numba is the default when it imports. :func:`set_backend` swaps
it at runtime for tests and benchmarks. Both paths compute the same values up
to floating-point summation order.

All kernels work on C-contiguous float64 arrays. Row kernels take 2-D
``(rows, width)`` views; the class kernels take ``x[B, H, n, C]`` with an
integer class matrix ``E[B, n, m]`` shared across the H axis.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False


# --- numpy implementations ---------------------------------------------------


def _np_softmax(x, mask):
    z = np.where(mask, x, -np.inf)
    zmax = z.max(axis=1, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    e = np.where(mask, np.exp(z - zmax), 0.0)
    s = e.sum(axis=1, keepdims=True)
    return np.divide(e, s, out=np.zeros_like(e), where=s > 0)


def _np_softmax_backward(y, gy):
    return y * (gy - (gy * y).sum(axis=1, keepdims=True))


def _np_layer_norm(x, eps):
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=1, keepdims=True) + eps)
    return xc * inv, inv[:, 0]


def _np_layer_norm_backward(y, inv, gy):
    d = y.shape[1]
    gm = gy.mean(axis=1, keepdims=True)
    gym = (gy * y).sum(axis=1, keepdims=True) / d
    return inv[:, None] * (gy - gm - y * gym)


def _np_class_gather(x, E):
    # out[b,h,i,j] = x[b,h,i,E[b,i,j]]
    idx = np.broadcast_to(E[:, None, :, :], (x.shape[0], x.shape[1]) + E.shape[1:])
    return np.take_along_axis(x, idx, axis=3)


def _np_class_scatter(y, E, n_classes):
    # out[b,h,i,c] = sum_j y[b,h,i,j] [E[b,i,j] == c]
    onehot = (E[..., None] == np.arange(n_classes)).astype(np.float64)
    out = np.matmul(y.transpose(0, 2, 1, 3), onehot)  # (B, n, H, C)
    return np.ascontiguousarray(out.transpose(0, 2, 1, 3))


def _np_embedding_backward(g, idx, n_rows):
    out = np.zeros((n_rows, g.shape[1]))
    np.add.at(out, idx, g)
    return out


# --- numba implementations ---------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _nb_softmax(x, mask):
        rows, width = x.shape
        out = np.zeros_like(x)
        for r in range(rows):
            m = -np.inf
            for c in range(width):
                if mask[r, c] and x[r, c] > m:
                    m = x[r, c]
            if m == -np.inf:
                continue
            s = 0.0
            for c in range(width):
                if mask[r, c]:
                    e = np.exp(x[r, c] - m)
                    out[r, c] = e
                    s += e
            for c in range(width):
                out[r, c] /= s
        return out

    @njit(cache=True)
    def _nb_softmax_backward(y, gy):
        rows, width = y.shape
        out = np.empty_like(y)
        for r in range(rows):
            dot = 0.0
            for c in range(width):
                dot += gy[r, c] * y[r, c]
            for c in range(width):
                out[r, c] = y[r, c] * (gy[r, c] - dot)
        return out

    @njit(cache=True)
    def _nb_layer_norm(x, eps):
        rows, d = x.shape
        out = np.empty_like(x)
        inv = np.empty(rows)
        for r in range(rows):
            mu = 0.0
            for c in range(d):
                mu += x[r, c]
            mu /= d
            var = 0.0
            for c in range(d):
                t = x[r, c] - mu
                var += t * t
            iv = 1.0 / np.sqrt(var / d + eps)
            inv[r] = iv
            for c in range(d):
                out[r, c] = (x[r, c] - mu) * iv
        return out, inv

    @njit(cache=True)
    def _nb_layer_norm_backward(y, inv, gy):
        rows, d = y.shape
        out = np.empty_like(y)
        for r in range(rows):
            gm = 0.0
            gym = 0.0
            for c in range(d):
                gm += gy[r, c]
                gym += gy[r, c] * y[r, c]
            gm /= d
            gym /= d
            for c in range(d):
                out[r, c] = inv[r] * (gy[r, c] - gm - y[r, c] * gym)
        return out

    @njit(cache=True)
    def _nb_class_gather(x, E):
        B, H, n, _ = x.shape
        m = E.shape[2]
        out = np.empty((B, H, n, m))
        for b in range(B):
            for h in range(H):
                for i in range(n):
                    for j in range(m):
                        out[b, h, i, j] = x[b, h, i, E[b, i, j]]
        return out

    @njit(cache=True)
    def _nb_class_scatter(y, E, n_classes):
        B, H, n, m = y.shape
        out = np.zeros((B, H, n, n_classes))
        for b in range(B):
            for h in range(H):
                for i in range(n):
                    for j in range(m):
                        out[b, h, i, E[b, i, j]] += y[b, h, i, j]
        return out

    @njit(cache=True)
    def _nb_embedding_backward(g, idx, n_rows):
        out = np.zeros((n_rows, g.shape[1]))
        for r in range(idx.shape[0]):
            k = idx[r]
            for c in range(g.shape[1]):
                out[k, c] += g[r, c]
        return out


_IMPLS = {
    "numpy": {
        "softmax": _np_softmax,
        "softmax_backward": _np_softmax_backward,
        "layer_norm": _np_layer_norm,
        "layer_norm_backward": _np_layer_norm_backward,
        "class_gather": _np_class_gather,
        "class_scatter": _np_class_scatter,
        "embedding_backward": _np_embedding_backward,
    }
}
if HAVE_NUMBA:
    _IMPLS["numba"] = {
        "softmax": _nb_softmax,
        "softmax_backward": _nb_softmax_backward,
        "layer_norm": _nb_layer_norm,
        "layer_norm_backward": _nb_layer_norm_backward,
        "class_gather": _nb_class_gather,
        "class_scatter": _nb_class_scatter,
        "embedding_backward": _nb_embedding_backward,
    }

BACKEND = "numpy"
softmax = _np_softmax
softmax_backward = _np_softmax_backward
layer_norm = _np_layer_norm
layer_norm_backward = _np_layer_norm_backward
class_gather = _np_class_gather
class_scatter = _np_class_scatter
embedding_backward = _np_embedding_backward


def available_backends() -> list[str]:
    return sorted(_IMPLS)


def set_backend(name: str) -> None:
    global BACKEND
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} unavailable; choose from {available_backends()}")
    g = globals()
    for fn_name, fn in _IMPLS[name].items():
        g[fn_name] = fn
    BACKEND = name


def _configure_threads() -> None:
    n = os.environ.get("MOLMASK_THREADS")
    if n and HAVE_NUMBA:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


set_backend(os.environ.get("MOLMASK_BACKEND", "numba" if HAVE_NUMBA else "numpy"))
_configure_threads()
