"""A small convolutional network implemented on numpy.

Architecture: per block, a 3x3 same-padding convolution, a rectifier, and
2x max-pool downsampling; then global average pooling into the
representation vector and a linear head with a logistic output. Max
pooling matters here: small objects cover ~1% of the frame and survive
max but not mean downsampling. All convolutions run as im2col + matmul
so the heavy lifting stays in BLAS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch


def conv3x3_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x: (n, c, h, w); w: (o, c, 3, 3); b: (o,). Same padding, stride 1.
    Returns (out, cols) where cols is the im2col cache for the backward pass."""
    n, c, hh, ww = x.shape
    o = w.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((n, 9 * c, hh * ww), dtype=x.dtype)
    t = 0
    for di in range(3):
        for dj in range(3):
            cols[:, t * c : (t + 1) * c] = xp[:, :, di : di + hh, dj : dj + ww].reshape(
                n, c, hh * ww
            )
            t += 1
    wmat = np.ascontiguousarray(w.transpose(0, 2, 3, 1)).reshape(o, 9 * c)
    out = np.matmul(wmat[None], cols) + b[None, :, None]
    return out.reshape(n, o, hh, ww), (cols, wmat)


def conv3x3_backward(dout: np.ndarray, x_shape, cache):
    n, c, hh, ww = x_shape
    cols, wmat = cache
    o = wmat.shape[0]
    dflat = dout.reshape(n, o, hh * ww)
    dwmat = np.matmul(dflat, cols.transpose(0, 2, 1)).sum(axis=0)
    db = dflat.sum(axis=(0, 2))
    dcols = np.matmul(wmat.T[None], dflat)
    dxp = np.zeros((n, c, hh + 2, ww + 2), dtype=dout.dtype)
    t = 0
    for di in range(3):
        for dj in range(3):
            dxp[:, :, di : di + hh, dj : dj + ww] += dcols[
                :, t * c : (t + 1) * c
            ].reshape(n, c, hh, ww)
            t += 1
    dw = dwmat.reshape(o, 3, 3, c).transpose(0, 3, 1, 2)
    return dxp[:, :, 1 : hh + 1, 1 : ww + 1], np.ascontiguousarray(dw), db


def maxpool2_forward(x: np.ndarray):
    """2x2 max pool, stride 2. Returns (out, argmax-in-window cache); ties
    resolve to the first maximum, so the backward pass is deterministic."""
    n, c, h, w = x.shape
    view = (
        x.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )
    idx = view.argmax(axis=4)
    out = np.take_along_axis(view, idx[..., None], axis=4)[..., 0]
    return out, idx


def maxpool2_backward(dout: np.ndarray, idx: np.ndarray) -> np.ndarray:
    n, c, h2, w2 = dout.shape
    dview = np.zeros((n, c, h2, w2, 4), dtype=dout.dtype)
    np.put_along_axis(dview, idx[..., None], dout[..., None], axis=4)
    return (
        dview.reshape(n, c, h2, w2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, 2 * h2, 2 * w2)
    )


def bce_with_logits(z: np.ndarray, y: np.ndarray):
    """Mean binary cross-entropy on logits, numerically stable; returns
    (loss, dloss/dz)."""
    zy = np.clip(z, 0, None) - z * y + np.log1p(np.exp(-np.abs(z)))
    p = 1.0 / (1.0 + np.exp(-z))
    return float(zy.mean()), (p - y) / z.shape[0]


@dataclass
class ConvNetConfig:
    in_channels: int = 3
    resolution: int = 64
    channels: tuple[int, ...] = (8, 16, 32)
    dtype: str = "float32"

    def __post_init__(self):
        if self.resolution % (2 ** len(self.channels)) != 0:
            raise DimensionMismatch(
                f"resolution {self.resolution} not divisible by the "
                f"{2 ** len(self.channels)}x total downsampling"
            )


class SmallConvNet:
    """Conv blocks -> global average pool (the representation) -> linear head."""

    def __init__(self, cfg: ConvNetConfig, seed: int = 0):
        self.cfg = cfg
        dtype = np.dtype(cfg.dtype)
        rng = np.random.default_rng([seed, 17])
        self.params: dict[str, np.ndarray] = {}
        c_in = cfg.in_channels
        for i, c_out in enumerate(cfg.channels):
            fan_in = c_in * 9
            self.params[f"w{i}"] = (
                rng.standard_normal((c_out, c_in, 3, 3)) * np.sqrt(2.0 / fan_in)
            ).astype(dtype)
            self.params[f"b{i}"] = np.zeros(c_out, dtype=dtype)
            c_in = c_out
        self.params["wf"] = (rng.standard_normal((1, c_in)) * np.sqrt(1.0 / c_in)).astype(dtype)
        self.params["bf"] = np.zeros(1, dtype=dtype)

    @property
    def rep_dim(self) -> int:
        return self.cfg.channels[-1]

    def forward(self, x: np.ndarray, want_cache: bool = False):
        """x: (n, c, h, w) float in [0, 1]. Returns (logits, rep[, cache])."""
        caches = []
        out = x
        for i in range(len(self.cfg.channels)):
            pre, conv_cache = conv3x3_forward(out, self.params[f"w{i}"], self.params[f"b{i}"])
            act = np.maximum(pre, 0)
            pooled, pool_idx = maxpool2_forward(act)
            caches.append((out.shape, conv_cache, pre > 0, pool_idx))
            out = pooled
        rep = out.mean(axis=(2, 3))
        logits = rep @ self.params["wf"].T + self.params["bf"]
        if want_cache:
            return logits[:, 0], rep, (caches, out.shape, rep)
        return logits[:, 0], rep

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray):
        logits, rep, (caches, out_shape, _) = self.forward(x, want_cache=True)
        loss, dz = bce_with_logits(logits.astype(np.float64), y.astype(np.float64))
        dz = dz.astype(x.dtype)[:, None]
        grads = {
            "wf": dz.T @ rep,
            "bf": dz.sum(axis=0),
        }
        drep = dz @ self.params["wf"]
        n, c, h, w = out_shape
        dout = np.broadcast_to(drep[:, :, None, None] / (h * w), out_shape).astype(x.dtype)
        for i in reversed(range(len(self.cfg.channels))):
            x_shape, conv_cache, relu_mask, pool_idx = caches[i]
            dact = maxpool2_backward(dout, pool_idx)
            dpre = dact * relu_mask
            dout, grads[f"w{i}"], grads[f"b{i}"] = conv3x3_backward(dpre, x_shape, conv_cache)
        return loss, grads

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        for k in self.params:
            self.params[k] = params[k].copy()
