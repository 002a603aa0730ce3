"""A small reverse-mode differentiation engine over numpy arrays.

Only the operators the embedding network needs are provided. Each op returns
a :class:`Tensor` that remembers its parents and a closure mapping the output
gradient to parent gradients; :func:`backward` walks the graph in reverse
topological order.

Activations use the time-major, channels-last layout ``(T, N, V, C)``.
"""
from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "parents", "_backward", "requires_grad")

    def __init__(self, value, parents=(), backward_fn=None, requires_grad=False):
        self.value = value
        self.grad = None
        self.parents = parents
        self._backward = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, dtype={self.value.dtype})"


def leaf(value, requires_grad=True) -> Tensor:
    return Tensor(value, requires_grad=requires_grad)


def _accumulate(t: Tensor, g) -> None:
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor, grad) -> None:
    """Propagate ``grad`` (same shape as ``root.value``) to every leaf below ``root``."""
    for node in _topo_order(root):
        if node is not root:
            node.grad = None
    root.grad = np.asarray(grad, dtype=root.value.dtype)
    for node in reversed(_topo_order(root)):
        if node._backward is None or node.grad is None or not node.requires_grad:
            continue
        node._backward(node.grad)


# ----------------------------------------------------------------------------
# operators


def graph_conv(x: Tensor, adjacency: np.ndarray, weight: Tensor) -> Tensor:
    """``out[..., w, d] = sum_k sum_v A_k[w, v] x[..., v, c] W_k[c, d]``.

    ``adjacency`` is ``(K, V, V)``, ``weight`` is ``(K, C, D)``.
    """
    K, C, D = weight.value.shape
    xv = x.value
    agg = np.stack([np.matmul(adjacency[k], xv) for k in range(K)], axis=-2)  # (N,T,V,K,C)
    lead = agg.shape[:-2]
    flat = agg.reshape(-1, K * C)
    w_flat = weight.value.reshape(K * C, D)
    out = (flat @ w_flat).reshape(*lead, D)

    def _back(g):
        g_flat = g.reshape(-1, D)
        if weight.requires_grad:
            _accumulate(weight, (flat.T @ g_flat).reshape(K, C, D))
        if x.requires_grad:
            g_agg = (g_flat @ w_flat.T).reshape(*lead, K, C)
            gx = sum(np.matmul(adjacency[k].T, g_agg[..., k, :]) for k in range(K))
            _accumulate(x, gx)

    return Tensor(out, (x, weight), _back)


def temporal_conv(x: Tensor, weight: Tensor) -> Tensor:
    """Same-padded convolution along axis 0 (time); ``weight`` is ``(tau, C, D)``.

    Time-major layout keeps every shifted slice contiguous, so each tap is a
    plain matmul without an im2col copy.
    """
    tau, C, D = weight.value.shape
    xv = x.value
    T = xv.shape[0]
    rest = xv.shape[1:-1]
    pad = tau // 2
    widths = [(0, 0)] * xv.ndim
    widths[0] = (pad, tau - 1 - pad)
    xp = np.pad(xv, widths).reshape(T + tau - 1, -1, C)
    m = xp.shape[1]
    wv = weight.value
    out = np.zeros((T * m, D), dtype=np.result_type(xv, wv))
    for j in range(tau):
        out += xp[j:j + T].reshape(-1, C) @ wv[j]

    def _back(g):
        g_flat = g.reshape(-1, D)
        if weight.requires_grad:
            gw = np.empty_like(wv)
            for j in range(tau):
                gw[j] = xp[j:j + T].reshape(-1, C).T @ g_flat
            _accumulate(weight, gw)
        if x.requires_grad:
            gxp = np.zeros((T + tau - 1, m * C), dtype=xp.dtype).reshape(T + tau - 1, m, C)
            for j in range(tau):
                gxp[j:j + T] += (g_flat @ wv[j].T).reshape(T, m, C)
            _accumulate(x, gxp[pad:pad + T].reshape(xv.shape))

    return Tensor(out.reshape(*((T,) + rest + (D,))), (x, weight), _back)


def relu(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """``max(x, 0)``; an explicit ``mask`` pins the active set (used by gradient checks)."""
    if mask is None:
        mask = x.value > 0
    out = x.value * mask

    def _back(g):
        _accumulate(x, g * mask)

    return Tensor(out, (x,), _back)


def add(a: Tensor, b: Tensor) -> Tensor:
    def _back(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return Tensor(a.value + b.value, (a, b), _back)


def channel_affine(x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    """Per-channel ``scale * x + shift`` over the last axis."""
    out = x.value * scale.value + shift.value
    reduce_axes = tuple(range(x.value.ndim - 1))

    def _back(g):
        _accumulate(x, g * scale.value)
        _accumulate(scale, (g * x.value).sum(axis=reduce_axes))
        _accumulate(shift, g.sum(axis=reduce_axes))

    return Tensor(out, (x, scale, shift), _back)


def mean_pool(x: Tensor, batch_axis: int = 1) -> Tensor:
    """Average over every axis except ``batch_axis`` and the channel axis: ``-> (N, C)``."""
    xv = x.value
    axes = tuple(a for a in range(xv.ndim - 1) if a != batch_axis)
    count = int(np.prod([xv.shape[a] for a in axes]))
    out = xv.mean(axis=axes)

    def _back(g):
        shape = [1] * xv.ndim
        shape[batch_axis] = g.shape[0]
        shape[-1] = g.shape[-1]
        _accumulate(x, np.broadcast_to(g.reshape(shape) / count, xv.shape).copy())

    return Tensor(out, (x,), _back)


def matmul(x: Tensor, w: Tensor) -> Tensor:
    out = x.value @ w.value

    def _back(g):
        _accumulate(x, g @ w.value.T)
        _accumulate(w, x.value.T @ g)

    return Tensor(out, (x, w), _back)


def l2_normalize(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Row-wise unit normalization; rows with norm <= eps map to the first basis vector."""
    xv = x.value
    norm = np.sqrt((xv * xv).sum(axis=1, keepdims=True))
    degenerate = norm[:, 0] <= eps
    safe = np.where(norm > eps, norm, 1.0)
    out = xv / safe
    if degenerate.any():
        out[degenerate] = 0
        out[degenerate, 0] = 1

    def _back(g):
        dot = (out * g).sum(axis=1, keepdims=True)
        gx = (g - out * dot) / safe
        gx[degenerate] = 0
        _accumulate(x, gx)

    return Tensor(out, (x,), _back)
