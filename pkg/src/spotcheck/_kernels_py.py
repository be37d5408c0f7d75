"""Pure numpy implementations of the numerical kernels.

This module is the fallback used when the compiled extension is not
available; `spotcheck.backend` picks one implementation at import time.
Both implementations follow the same branch structure so their results
agree to floating-point roundoff (verified by the backend tests).
"""

from __future__ import annotations

import numpy as np


def pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    """All-pairs squared Euclidean distances with an exact zero diagonal."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    sq = np.einsum("ij,ij->i", x, x)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _entropy_and_probs(di: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    w = np.exp(-di * beta)
    sw = float(w.sum())
    if sw <= 0.0:
        return -np.inf, w
    h = np.log(sw) + beta * float(di @ w) / sw
    return h, w / sw

def perplexity_search(
    d2: np.ndarray,
    perplexity: float,
    tol: float = 1e-5,
    max_iter: int = 50,
) -> np.ndarray:
    """Per-row precision (beta) search so each conditional distribution over
    the other points has entropy log(perplexity).

    d2 is the n x n squared-distance matrix. Returns the n x n conditional
    probability matrix with a zero diagonal and rows summing to 1.
    """
    d2 = np.asarray(d2, dtype=np.float64)
    n = d2.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        idx = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        di = d2[i, idx]
        beta = 1.0
        lo, hi = 0.0, np.inf
        h, pi = _entropy_and_probs(di, beta)
        for _ in range(max_iter):
            if abs(h - target) <= tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = beta * 0.5 if lo == 0.0 else 0.5 * (beta + lo)
            h, pi = _entropy_and_probs(di, beta)
        p[i, idx] = pi
    return p


def tsne_grad(p: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """KL(P || Q) and its gradient in y for a Student-t low-dim kernel.

    p: symmetric joint probabilities (zero diagonal, entries sum to 1).
    y: n x 2 embedding. Returns (gradient n x 2, kl scalar).
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    tiny = 1e-300
    d2 = pairwise_sq_dists(y)
    num = 1.0 / (1.0 + d2)
    np.fill_diagonal(num, 0.0)
    z = float(num.sum())
    q = num / z
    kl = float(np.sum(p * (np.log(np.maximum(p, tiny)) - np.log(np.maximum(q, tiny))), where=p > 0))
    pq = (p - q) * num
    s = pq.sum(axis=1)
    grad = 4.0 * (s[:, None] * y - pq @ y)
    return grad, kl


def gmm_estep(
    x: np.ndarray,
    weights: np.ndarray,
    means: np.ndarray,
    variances: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Responsibilities and total log-likelihood of a diagonal-covariance
    Gaussian mixture. Returns (resp n x k, sum of per-point log densities)."""
    x = np.asarray(x, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    log_w = np.log(np.maximum(np.asarray(weights, dtype=np.float64), 1e-300))
    log_det = np.sum(np.log(2.0 * np.pi * variances), axis=1)
    diff = x[:, None, :] - means[None, :, :]
    maha = np.sum(diff * diff / variances[None, :, :], axis=2)
    lp = log_w[None, :] - 0.5 * (log_det[None, :] + maha)
    m = lp.max(axis=1)
    lse = m + np.log(np.sum(np.exp(lp - m[:, None]), axis=1))
    resp = np.exp(lp - lse[:, None])
    return resp, float(lse.sum())
