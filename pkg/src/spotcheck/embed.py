"""2D embeddings of model representations.

The main reducer is a small autoencoder trained with a combined objective:
a neighborhood-matching term (KL divergence between perplexity-calibrated
high-dimensional affinities and Student-t affinities of the 2D codes) plus
a reconstruction term. A PCA projection is provided as a deterministic
fallback and test baseline. Both produce an Embedding2D whose columns are
min-max normalized to the unit square.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backend import pairwise_sq_dists, perplexity_search, tsne_grad
from .errors import DegenerateInput, DimensionMismatch, NumericalError, ValidationError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class ReducerConfig:
    perplexity: float = 30.0
    hidden: tuple[int, int] = (64, 32)
    lambda_rec: float = 1.0
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.perplexity <= 1.0:
            raise ValidationError(f"perplexity must exceed 1, got {self.perplexity}")
        if self.epochs < 1 or self.batch_size < 8:
            raise ValidationError("need epochs >= 1 and batch_size >= 8")

    def to_json(self) -> dict:
        return {
            "perplexity": self.perplexity,
            "hidden": list(self.hidden),
            "lambda_rec": self.lambda_rec,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ReducerConfig":
        obj = dict(obj)
        if "hidden" in obj:
            obj["hidden"] = tuple(obj["hidden"])
        return cls(**obj)


@dataclass(frozen=True)
class Embedding2D:
    coords: np.ndarray  # (n, 2) raw 2D codes
    normalized: np.ndarray  # (n, 2) min-max scaled to [0, 1]^2
    loss_curve: tuple[float, ...] = ()
    seed: int | None = None
    explained_variance: tuple[float, float] | None = None

    def __post_init__(self):
        if self.coords.shape != self.normalized.shape or self.coords.shape[1:] != (2,):
            raise DimensionMismatch(
                f"embedding shapes {self.coords.shape} vs {self.normalized.shape}"
            )

    def __len__(self) -> int:
        return self.coords.shape[0]


def normalize_unit_square(s: np.ndarray) -> np.ndarray:
    """Min-max scale each column to [0, 1]; a constant column becomes 0.5
    so it carries no information instead of being undefined."""
    s = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValidationError("normalize_unit_square requires finite input")
    lo = s.min(axis=0)
    hi = s.max(axis=0)
    span = hi - lo
    out = np.empty_like(s)
    for j in range(s.shape[1]):
        if span[j] == 0.0:
            out[:, j] = 0.5
        else:
            out[:, j] = (s[:, j] - lo[j]) / span[j]
    return out


def reduce_pca2(g: np.ndarray) -> Embedding2D:
    """Project onto the top-2 principal components.

    Components are ordered by descending eigenvalue with sign fixed so each
    component's largest-magnitude coordinate is positive. Directions whose
    eigenvalue is numerically zero yield a zero column, which normalization
    then maps to 0.5.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 2:
        raise ValidationError(f"reduce_pca2 needs an n x d matrix with n >= 2, got {g.shape}")
    n, d = g.shape
    xc = g - g.mean(axis=0)
    cov = (xc.T @ xc) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    coords = np.zeros((n, 2))
    variances = [0.0, 0.0]
    tol = max(float(eigvals[0]), 0.0) * 1e-12
    for j in range(min(2, d)):
        ev = float(eigvals[j])
        if ev <= tol:
            continue
        v = eigvecs[:, j]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        coords[:, j] = xc @ v
        variances[j] = ev
    return Embedding2D(
        coords=coords,
        normalized=normalize_unit_square(coords),
        explained_variance=(variances[0], variances[1]),
    )


def _init_params(d: int, hidden: tuple[int, int], rng: np.random.Generator) -> dict:
    sizes = [d, hidden[0], hidden[1], 2, hidden[1], hidden[0], d]
    params: dict[str, np.ndarray] = {}
    for i in range(6):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        params[f"w{i + 1}"] = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        params[f"b{i + 1}"] = np.zeros(fan_out)
    return params


def _encode(params: dict, x: np.ndarray) -> np.ndarray:
    h1 = np.maximum(x @ params["w1"] + params["b1"], 0.0)
    h2 = np.maximum(h1 @ params["w2"] + params["b2"], 0.0)
    return h2 @ params["w3"] + params["b3"]


def _loss_and_grads(
    params: dict, x: np.ndarray, p: np.ndarray, lambda_rec: float
) -> tuple[float, float, float, dict]:
    """Total loss (KL + lambda_rec * MSE) and gradients for one batch with a
    fixed affinity matrix p. Kept as a pure function so gradients can be
    checked against finite differences."""
    a1 = x @ params["w1"] + params["b1"]
    h1 = np.maximum(a1, 0.0)
    a2 = h1 @ params["w2"] + params["b2"]
    h2 = np.maximum(a2, 0.0)
    y = h2 @ params["w3"] + params["b3"]

    dy_kl, kl = tsne_grad(p, y)

    a4 = y @ params["w4"] + params["b4"]
    g1 = np.maximum(a4, 0.0)
    a5 = g1 @ params["w5"] + params["b5"]
    g2 = np.maximum(a5, 0.0)
    xhat = g2 @ params["w6"] + params["b6"]
    diff = xhat - x
    rec = float(np.mean(diff * diff))
    total = float(kl) + lambda_rec * rec

    grads: dict[str, np.ndarray] = {}
    dxhat = (2.0 * lambda_rec / diff.size) * diff
    grads["w6"] = g2.T @ dxhat
    grads["b6"] = dxhat.sum(axis=0)
    dg2 = (dxhat @ params["w6"].T) * (a5 > 0)
    grads["w5"] = g1.T @ dg2
    grads["b5"] = dg2.sum(axis=0)
    dg1 = (dg2 @ params["w5"].T) * (a4 > 0)
    grads["w4"] = y.T @ dg1
    grads["b4"] = dg1.sum(axis=0)

    dy = dy_kl + dg1 @ params["w4"].T
    grads["w3"] = h2.T @ dy
    grads["b3"] = dy.sum(axis=0)
    dh2 = (dy @ params["w3"].T) * (a2 > 0)
    grads["w2"] = h1.T @ dh2
    grads["b2"] = dh2.sum(axis=0)
    dh1 = (dh2 @ params["w2"].T) * (a1 > 0)
    grads["w1"] = x.T @ dh1
    grads["b1"] = dh1.sum(axis=0)
    return total, float(kl), rec, grads


def batch_affinities(x: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized joint neighbor probabilities for one batch: conditional
    distributions at the requested perplexity, averaged with their transpose
    and divided by the batch size so all entries sum to 1."""
    b = x.shape[0]
    d2 = pairwise_sq_dists(x)
    cond = perplexity_search(d2, min(perplexity, b / 4.0))
    return (cond + cond.T) / (2.0 * b)


class Reducer:
    """Fitted parametric map from representations to 2D codes.

    Inputs are centered per column and divided by a single global scale
    taken from the fitting data; the encoder itself is three affine layers
    with rectifier nonlinearities on the hidden layers.
    """

    def __init__(
        self,
        params: dict,
        mean: np.ndarray,
        scale: np.ndarray,
        cfg: ReducerConfig,
        seed: int,
        loss_curve: tuple[float, ...],
        kl_curve: tuple[float, ...],
        rec_curve: tuple[float, ...],
    ):
        self.params = {k: v.copy() for k, v in params.items()}
        self.mean = mean.copy()
        self.scale = scale.copy()
        self.cfg = cfg
        self.seed = seed
        self.loss_curve = loss_curve
        self.kl_curve = kl_curve
        self.rec_curve = rec_curve

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    def transform(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=np.float64)
        if g.ndim != 2 or g.shape[1] != self.input_dim:
            raise DimensionMismatch(
                f"expected (n, {self.input_dim}) input, got {g.shape}"
            )
        return _encode(self.params, (g - self.mean) / self.scale)

    def embed(self, g: np.ndarray) -> Embedding2D:
        coords = self.transform(g)
        return Embedding2D(
            coords=coords,
            normalized=normalize_unit_square(coords),
            loss_curve=self.loss_curve,
            seed=self.seed,
        )


def fit_reducer(g: np.ndarray, cfg: ReducerConfig, seed: int) -> Reducer:
    """Train the parametric reducer on representations g (n x d).

    Each epoch shuffles the rows and trains on minibatches; affinities are
    computed per batch. Optimization is adaptive-moment gradient descent.
    Raises DegenerateInput when all rows are identical and NumericalError if
    the loss stops being finite.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 10:
        raise ValidationError(f"fit_reducer needs an n x d matrix with n >= 10, got {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValidationError("fit_reducer requires finite input")
    if np.all(g == g[0]):
        raise DegenerateInput("all input rows are identical; no neighborhood structure to fit")
    n, d = g.shape
    seed = int(seed)

    mean = g.mean(axis=0)
    # one global scale, not per-column: column-wise standardization would
    # equalize column variances and erase neighbor structure that lives in
    # a few large-scale columns
    centered = g - mean
    global_std = float(centered.std())
    scale = np.full(d, global_std if global_std > 0 else 1.0)
    x_all = centered / scale

    params = _init_params(d, cfg.hidden, np.random.default_rng([seed, 7]))
    shuffle_rng = np.random.default_rng([seed, 11])
    adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    step = 0

    n_batches = max(1, -(-n // cfg.batch_size))
    loss_curve: list[float] = []
    kl_curve: list[float] = []
    rec_curve: list[float] = []
    for _epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        epoch_total = 0.0
        epoch_kl = 0.0
        epoch_rec = 0.0
        for batch_idx in np.array_split(perm, n_batches):
            xb = x_all[batch_idx]
            p = batch_affinities(xb, cfg.perplexity)
            total, kl, rec, grads = _loss_and_grads(params, xb, p, cfg.lambda_rec)
            if not np.isfinite(total):
                raise NumericalError(f"non-finite training loss at step {step}")
            epoch_total += total
            epoch_kl += kl
            epoch_rec += rec
            step += 1
            b1c = 1.0 - ADAM_BETA1**step
            b2c = 1.0 - ADAM_BETA2**step
            for k in params:
                gk = grads[k]
                adam_m[k] = ADAM_BETA1 * adam_m[k] + (1.0 - ADAM_BETA1) * gk
                adam_v[k] = ADAM_BETA2 * adam_v[k] + (1.0 - ADAM_BETA2) * gk * gk
                params[k] = params[k] - cfg.learning_rate * (adam_m[k] / b1c) / (
                    np.sqrt(adam_v[k] / b2c) + ADAM_EPS
                )
        loss_curve.append(epoch_total / n_batches)
        kl_curve.append(epoch_kl / n_batches)
        rec_curve.append(epoch_rec / n_batches)

    return Reducer(
        params=params,
        mean=mean,
        scale=scale,
        cfg=cfg,
        seed=seed,
        loss_curve=tuple(loss_curve),
        kl_curve=tuple(kl_curve),
        rec_curve=tuple(rec_curve),
    )


def write_embedding_csv(
    path: str | Path,
    image_ids,
    embedding: Embedding2D,
    confidences: np.ndarray,
) -> None:
    """Scatter-data export: one row per image with its normalized 2D
    position and confidence."""
    if len(image_ids) != len(embedding) or len(confidences) != len(embedding):
        raise DimensionMismatch("image_ids, embedding, confidences must align")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["image_id", "x", "y", "confidence"])
        for i, image_id in enumerate(image_ids):
            writer.writerow(
                [
                    str(image_id),
                    repr(float(embedding.normalized[i, 0])),
                    repr(float(embedding.normalized[i, 1])),
                    repr(float(confidences[i])),
                ]
            )
