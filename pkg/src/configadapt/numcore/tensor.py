"""Minimal reverse-mode autodiff over dense numpy arrays.

Only the operations the detector needs are implemented. Every reduction
accumulates in float64 (directly or inside the conv kernels), and graphs are
replayed in a fixed order, so training is deterministic for a fixed seed.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericError, ShapeMismatch
from . import kernels

# Enabled by tests to validate every op output; off by default for speed.
CHECK_FINITE = False


def _check(arr: np.ndarray, what: str) -> np.ndarray:
    if CHECK_FINITE and not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_backward", "_parents")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._backward = None
        self._parents = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g.astype(self.data.dtype, copy=False)

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeMismatch("backward() requires a scalar loss")
        topo, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        for node in topo:
            if node.requires_grad and node.grad is not None:
                if not np.all(np.isfinite(node.grad)):
                    raise NumericError(f"non-finite gradient for {node.name or 'tensor'}")

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])


def parameter(data: np.ndarray, name: str) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def _node(data, parents, backward) -> Tensor:
    out = Tensor(_check(data, "op output"))
    live = tuple(p for p in parents if p.requires_grad or p._parents)
    if live:
        out._parents = live
        out._backward = backward
    return out


def _needs(t: Tensor) -> bool:
    return t.requires_grad or bool(t._parents)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[-1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    y = (a.data.astype(np.float64) @ b.data.astype(np.float64)).astype(a.dtype)

    def backward(g):
        if _needs(a):
            a.accumulate_grad(g.astype(np.float64) @ b.data.T.astype(np.float64))
        if _needs(b):
            b.accumulate_grad(a.data.reshape(-1, a.shape[-1]).T.astype(np.float64)
                              @ g.reshape(-1, g.shape[-1]).astype(np.float64))

    return _node(y, (a, b), backward)


def add_bias(x: Tensor, b: Tensor, channel_axis: int = -1) -> Tensor:
    shape = [1] * x.data.ndim
    shape[channel_axis] = b.data.size
    y = x.data + b.data.reshape(shape)

    def backward(g):
        if _needs(x):
            x.accumulate_grad(g)
        if _needs(b):
            axes = tuple(i for i in range(g.ndim) if i != channel_axis % g.ndim)
            b.accumulate_grad(g.sum(axis=axes, dtype=np.float64))

    return _node(y, (x, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"add {a.shape} + {b.shape}")
    y = a.data + b.data

    def backward(g):
        if _needs(a):
            a.accumulate_grad(g)
        if _needs(b):
            b.accumulate_grad(g)

    return _node(y, (a, b), backward)


def scale(x: Tensor, c: float) -> Tensor:
    y = x.data * x.dtype.type(c)

    def backward(g):
        if _needs(x):
            x.accumulate_grad(g * x.dtype.type(c))

    return _node(y, (x,), backward)


def relu(x: Tensor) -> Tensor:
    y = np.maximum(x.data, 0)

    def backward(g):
        if _needs(x):
            x.accumulate_grad(g * (x.data > 0))

    return _node(y, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    y = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.clip(d, 0, None))),
                 np.exp(np.clip(d, None, 0)) / (1.0 + np.exp(np.clip(d, None, 0))))
    y = y.astype(x.dtype)

    def backward(g):
        if _needs(x):
            x.accumulate_grad(g * y * (1.0 - y))

    return _node(y, (x,), backward)


def conv2d(x: Tensor, w: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    if x.data.ndim != 4 or w.data.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"conv2d {x.shape} * {w.shape}")
    xd = np.ascontiguousarray(x.data)
    wd = np.ascontiguousarray(w.data)
    y = kernels.conv2d_forward(xd, wd, stride, pad)

    def backward(g):
        g = np.ascontiguousarray(g)
        if _needs(x):
            x.accumulate_grad(kernels.conv2d_backward_input(
                g, wd, stride, pad, x.shape[2], x.shape[3]))
        if _needs(w):
            w.accumulate_grad(kernels.conv2d_backward_weight(
                g, xd, stride, pad, w.shape[2], w.shape[3]))

    return _node(y, (x, w), backward)


def max_pool_over_points(x: Tensor, valid: np.ndarray) -> Tensor:
    """Max over the point axis of a (P, K, C) block; `valid` is a (P, K) bool mask.

    Every row must contain at least one valid point (empty pillars are never
    stored). Gradient routes to the argmax entry per (pillar, channel).
    """
    masked = np.where(valid[:, :, None], x.data, -np.inf)
    idx = np.argmax(masked, axis=1)  # (P, C)
    y = np.take_along_axis(x.data, idx[:, None, :], axis=1)[:, 0, :]

    def backward(g):
        if _needs(x):
            dx = np.zeros_like(x.data)
            np.put_along_axis(dx, idx[:, None, :], g[:, None, :], axis=1)
            x.accumulate_grad(dx)

    return _node(y, (x,), backward)


def scatter_to_grid(feat: Tensor, ix: np.ndarray, iy: np.ndarray, grid: int) -> Tensor:
    """Place per-pillar feature rows (P, C) into a dense (C, grid, grid) image."""
    c = feat.shape[1]
    img = np.zeros((c, grid, grid), dtype=feat.dtype)
    img[:, iy, ix] = feat.data.T

    def backward(g):
        if _needs(feat):
            feat.accumulate_grad(g[:, iy, ix].T)

    return _node(img, (feat,), backward)


def stack(tensors: list[Tensor]) -> Tensor:
    y = np.stack([t.data for t in tensors])

    def backward(g):
        for i, t in enumerate(tensors):
            if _needs(t):
                t.accumulate_grad(g[i])

    return _node(y, tuple(tensors), backward)


def upsample2x_nearest(x: Tensor) -> Tensor:
    y = x.data.repeat(2, axis=-2).repeat(2, axis=-1)

    def backward(g):
        if _needs(x):
            n, c, h, w = x.shape
            x.accumulate_grad(
                g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5), dtype=np.float64))

    return _node(y, (x,), backward)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeMismatch(f"concat_channels {a.shape} | {b.shape}")
    y = np.concatenate([a.data, b.data], axis=1)
    ca = a.shape[1]

    def backward(g):
        if _needs(a):
            a.accumulate_grad(g[:, :ca])
        if _needs(b):
            b.accumulate_grad(g[:, ca:])

    return _node(y, (a, b), backward)


def focal_heatmap_loss(prob: Tensor, target: np.ndarray,
                       alpha: float = 2.0, beta: float = 4.0) -> Tensor:
    """Penalty-reduced focal loss over a probability heatmap.

    Cells with target exactly 1 are positives; everywhere else the penalty is
    reduced by (1 - target)^beta. Normalized by max(1, number of positives).
    """
    p = np.clip(prob.data.astype(np.float64), 1e-4, 1.0 - 1e-4)
    t = target.astype(np.float64)
    pos = t >= 1.0
    n_pos = max(1, int(pos.sum()))
    logp = np.log(p)
    log1p = np.log(1.0 - p)
    pos_term = -((1.0 - p) ** alpha) * logp
    neg_term = -((1.0 - t) ** beta) * (p ** alpha) * log1p
    total = np.where(pos, pos_term, neg_term).sum(dtype=np.float64) / n_pos

    def backward(g):
        if _needs(prob):
            gpos = alpha * ((1.0 - p) ** (alpha - 1.0)) * logp - ((1.0 - p) ** alpha) / p
            gneg = -((1.0 - t) ** beta) * (
                alpha * (p ** (alpha - 1.0)) * log1p - (p ** alpha) / (1.0 - p))
            dp = np.where(pos, gpos, gneg) / n_pos
            # clip is inactive in (1e-4, 1-1e-4); pass gradient through
            inside = (prob.data > 1e-4) & (prob.data < 1.0 - 1e-4)
            prob.accumulate_grad(float(g) * dp * inside)

    return _node(np.asarray(total, dtype=prob.dtype), (prob,), backward)


def l1_loss_at(pred: Tensor, target: np.ndarray, mask: np.ndarray) -> Tensor:
    """L1 loss over masked cells, normalized by max(1, number of masked cells).

    `mask` broadcasts against pred (e.g. per-cell mask across channels).
    """
    m = np.broadcast_to(mask, pred.shape).astype(np.float64)
    n = max(1, int(np.count_nonzero(mask)))
    diff = pred.data.astype(np.float64) - target.astype(np.float64)
    total = np.abs(diff * m).sum(dtype=np.float64) / n

    def backward(g):
        if _needs(pred):
            pred.accumulate_grad(float(g) * np.sign(diff) * m / n)

    return _node(np.asarray(total, dtype=pred.dtype), (pred,), backward)


def reshape(x: Tensor, shape: tuple) -> Tensor:
    y = x.data.reshape(shape)

    def backward(g):
        if _needs(x):
            x.accumulate_grad(g.reshape(x.shape))

    return _node(y, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    y = np.asarray(x.data.sum(dtype=np.float64), dtype=x.dtype)

    def backward(g):
        if _needs(x):
            x.accumulate_grad(np.full_like(x.data, float(g)))

    return _node(y, (x,), backward)
