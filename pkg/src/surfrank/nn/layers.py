"""Layer specifications and their forward/backward kernels.

Tensors are plain float64 numpy arrays: (batch, features) on dense paths and
(batch, height, width, channels) on image paths.  Every backward kernel
returns the gradient with respect to its input plus parameter gradients where
applicable; all reductions use numpy's fixed summation order, so gradients
are reproducible bit-for-bit.

Convolutions are fixed at 3x3 kernels with zero same-padding, pooling at 2x2
windows with stride 2.  Odd spatial sizes are pooled with -inf padding
(output side = ceil(side / 2)); the concat layer crops its through-branch by
at most one row/column to match the skip branch, which lets a once-pooled
network run on odd-sized grids at inference time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

Array = np.ndarray

KERNEL = 3
POOL = 2

ACTIVATIONS = ("relu", "sigmoid", "softmax", "identity")
LAYER_KINDS = ("dense", "conv2d", "maxpool2d", "upsample2d", "concat", "activation")


class LayerShapeError(ValueError):
    """Consecutive layers do not compose, or a runtime input has the wrong shape."""


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the computation chain.

    ``skip_from`` (concat only) is the index of the earlier layer whose output
    is concatenated, channels-last, after the current input.  ``activity_l1``
    and ``activity_l2`` add an output-activity penalty to the training loss.
    """

    kind: str
    in_features: int = 0
    units: int = 0
    in_channels: int = 0
    out_channels: int = 0
    activation: str = ""
    skip_from: int = -1
    activity_l1: float = 0.0
    activity_l2: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "dense" and (self.in_features < 1 or self.units < 1):
            raise ValueError("dense layer needs positive in_features and units")
        if self.kind == "conv2d" and (self.in_channels < 1 or self.out_channels < 1):
            raise ValueError("conv2d layer needs positive channel counts")
        if self.kind == "activation" and self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.kind == "concat" and self.skip_from < 0:
            raise ValueError("concat layer needs a skip_from index")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**d)


def dense_spec(in_features: int, units: int, **kw) -> LayerSpec:
    return LayerSpec(kind="dense", in_features=in_features, units=units, **kw)


def conv2d_spec(in_channels: int, out_channels: int, **kw) -> LayerSpec:
    return LayerSpec(kind="conv2d", in_channels=in_channels, out_channels=out_channels, **kw)


def activation_spec(name: str, **kw) -> LayerSpec:
    return LayerSpec(kind="activation", activation=name, **kw)


# ---------------------------------------------------------------------------
# dense
# ---------------------------------------------------------------------------


def dense_forward(x: Array, w: Array, b: Array) -> tuple[Array, tuple]:
    if x.shape[-1] != w.shape[0]:
        raise LayerShapeError(f"dense expects {w.shape[0]} features, got {x.shape[-1]}")
    flat = x.reshape(-1, x.shape[-1])
    y = flat @ w + b
    return y.reshape(x.shape[:-1] + (w.shape[1],)), (flat, x.shape)


def dense_backward(dy: Array, w: Array, cache: tuple) -> tuple[Array, Array, Array]:
    flat, x_shape = cache
    dyf = dy.reshape(-1, dy.shape[-1])
    dw = flat.T @ dyf
    db = dyf.sum(axis=0)
    dx = (dyf @ w.T).reshape(x_shape)
    return dx, dw, db


# ---------------------------------------------------------------------------
# conv2d (3x3, stride 1, zero same-padding)
# ---------------------------------------------------------------------------


def conv2d_forward(x: Array, w: Array, b: Array) -> tuple[Array, tuple]:
    if x.ndim != 4:
        raise LayerShapeError(f"conv2d expects a (B,H,W,C) tensor, got shape {x.shape}")
    if x.shape[-1] != w.shape[2]:
        raise LayerShapeError(f"conv2d expects {w.shape[2]} channels, got {x.shape[-1]}")
    bsz, h, wid, _ = x.shape
    xp = np.zeros((bsz, h + 2, wid + 2, x.shape[-1]))
    xp[:, 1:-1, 1:-1, :] = x
    y = np.broadcast_to(b, (bsz, h, wid, w.shape[3])).copy()
    for di in range(KERNEL):
        for dj in range(KERNEL):
            y += xp[:, di : di + h, dj : dj + wid, :] @ w[di, dj]
    return y, (xp, x.shape)


def conv2d_backward(dy: Array, w: Array, cache: tuple) -> tuple[Array, Array, Array]:
    xp, x_shape = cache
    _, h, wid, _ = x_shape
    dw = np.zeros_like(w)
    dxp = np.zeros_like(xp)
    db = dy.sum(axis=(0, 1, 2))
    for di in range(KERNEL):
        for dj in range(KERNEL):
            patch = xp[:, di : di + h, dj : dj + wid, :]
            dw[di, dj] = np.tensordot(patch, dy, axes=([0, 1, 2], [0, 1, 2]))
            dxp[:, di : di + h, dj : dj + wid, :] += dy @ w[di, dj].T
    return dxp[:, 1:-1, 1:-1, :], dw, db


# ---------------------------------------------------------------------------
# maxpool2d (2x2, stride 2; odd sides padded with -inf)
# ---------------------------------------------------------------------------


def maxpool2d_forward(x: Array) -> tuple[Array, tuple]:
    if x.ndim != 4:
        raise LayerShapeError(f"maxpool2d expects a (B,H,W,C) tensor, got shape {x.shape}")
    bsz, h, wid, ch = x.shape
    h2 = -(-h // POOL) * POOL
    w2 = -(-wid // POOL) * POOL
    if (h2, w2) == (h, wid):
        xp = x
    else:
        xp = np.full((bsz, h2, w2, ch), -np.inf)
        xp[:, :h, :wid, :] = x
    windows = (
        xp.reshape(bsz, h2 // POOL, POOL, w2 // POOL, POOL, ch)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(bsz, h2 // POOL, w2 // POOL, ch, POOL * POOL)
    )
    idx = windows.argmax(axis=-1)  # first maximum wins ties
    y = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
    return y, (idx, x.shape)


def maxpool2d_backward(dy: Array, cache: tuple) -> Array:
    idx, x_shape = cache
    bsz, h, wid, ch = x_shape
    h2 = -(-h // POOL) * POOL
    w2 = -(-wid // POOL) * POOL
    dwin = np.zeros(idx.shape + (POOL * POOL,))
    np.put_along_axis(dwin, idx[..., None], dy[..., None], axis=-1)
    dxp = (
        dwin.reshape(bsz, h2 // POOL, w2 // POOL, ch, POOL, POOL)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(bsz, h2, w2, ch)
    )
    return dxp[:, :h, :wid, :]


# ---------------------------------------------------------------------------
# upsample2d (nearest neighbour, factor 2)
# ---------------------------------------------------------------------------


def upsample2d_forward(x: Array) -> tuple[Array, tuple]:
    if x.ndim != 4:
        raise LayerShapeError(f"upsample2d expects a (B,H,W,C) tensor, got shape {x.shape}")
    y = x.repeat(POOL, axis=1).repeat(POOL, axis=2)
    return y, (x.shape,)


def upsample2d_backward(dy: Array, cache: tuple) -> Array:
    (x_shape,) = cache
    bsz, h, wid, ch = x_shape
    return dy.reshape(bsz, h, POOL, wid, POOL, ch).sum(axis=(2, 4))


# ---------------------------------------------------------------------------
# concat (channels-last; through-branch cropped by at most one row/column)
# ---------------------------------------------------------------------------


def concat_forward(x: Array, skip: Array) -> tuple[Array, tuple]:
    if x.ndim != 4 or skip.ndim != 4:
        raise LayerShapeError("concat expects (B,H,W,C) tensors")
    dh = x.shape[1] - skip.shape[1]
    dw = x.shape[2] - skip.shape[2]
    if not (0 <= dh <= 1 and 0 <= dw <= 1):
        raise LayerShapeError(
            f"concat branches have incompatible spatial dims {x.shape[1:3]} vs {skip.shape[1:3]}"
        )
    xc = x[:, : skip.shape[1], : skip.shape[2], :]
    y = np.concatenate([xc, skip], axis=-1)
    return y, (x.shape, x.shape[-1])


def concat_backward(dy: Array, cache: tuple) -> tuple[Array, Array]:
    x_shape, x_channels = cache
    dxc = dy[..., :x_channels]
    dskip = dy[..., x_channels:]
    if dxc.shape[1:3] == x_shape[1:3]:
        dx = dxc
    else:
        dx = np.zeros(x_shape)
        dx[:, : dxc.shape[1], : dxc.shape[2], :] = dxc
    return dx, dskip


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def activation_forward(name: str, x: Array) -> tuple[Array, tuple]:
    if name == "relu":
        y = np.maximum(x, 0.0)
        return y, (x > 0,)
    if name == "sigmoid":
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        return y, (y,)
    if name == "softmax":
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=-1, keepdims=True)
        return y, (y,)
    if name == "identity":
        return x, ()
    raise ValueError(f"unknown activation {name!r}")


def activation_backward(name: str, dy: Array, cache: tuple) -> Array:
    if name == "relu":
        (mask,) = cache
        return dy * mask
    if name == "sigmoid":
        (y,) = cache
        return dy * y * (1.0 - y)
    if name == "softmax":
        (y,) = cache
        inner = (dy * y).sum(axis=-1, keepdims=True)
        return y * (dy - inner)
    if name == "identity":
        return dy
    raise ValueError(f"unknown activation {name!r}")
