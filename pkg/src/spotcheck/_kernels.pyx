# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled numerical kernels: pairwise squared distances, perplexity
calibration, the t-SNE gradient, and the GMM E-step.

Mirrors the branch structure of `_kernels_py` so both backends agree to
floating-point roundoff.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, fabs, log

cnp.import_array()

DEF TWO_PI = 6.283185307179586


def pairwise_sq_dists(object xo):
    """All-pairs squared Euclidean distances with an exact zero diagonal."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.ascontiguousarray(xo, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, n), dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double acc, t
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                t = x[i, k] - x[j, k]
                acc += t * t
            out[i, j] = acc
            out[j, i] = acc
    return out


cdef double _entropy_row(double[:] di, double beta, double[:] pi) nogil:
    """Entropy of the conditional distribution at precision beta; fills pi
    with the normalized probabilities. Returns -inf when all weights
    underflow."""
    cdef Py_ssize_t m = di.shape[0]
    cdef Py_ssize_t j
    cdef double sw = 0.0, swd = 0.0, w
    for j in range(m):
        w = exp(-di[j] * beta)
        pi[j] = w
        sw += w
        swd += di[j] * w
    if sw <= 0.0:
        return -INFINITY
    for j in range(m):
        pi[j] = pi[j] / sw
    return log(sw) + beta * swd / sw


def perplexity_search(object d2o, double perplexity, double tol=1e-5, int max_iter=50):
    """Per-row precision search matching `_kernels_py.perplexity_search`."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d2 = np.ascontiguousarray(d2o, dtype=np.float64)
    cdef Py_ssize_t n = d2.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.zeros((n, n), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] di = np.empty(n - 1 if n > 0 else 0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pi = np.empty(n - 1 if n > 0 else 0, dtype=np.float64)
    cdef double target = log(perplexity)
    cdef Py_ssize_t i, j, k, it
    cdef double beta, lo, hi, h
    for i in range(n):
        k = 0
        for j in range(n):
            if j != i:
                di[k] = d2[i, j]
                k += 1
        beta = 1.0
        lo = 0.0
        hi = INFINITY
        h = _entropy_row(di, beta, pi)
        for it in range(max_iter):
            if fabs(h - target) <= tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2.0 if hi == INFINITY else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = beta * 0.5 if lo == 0.0 else 0.5 * (beta + lo)
            h = _entropy_row(di, beta, pi)
        k = 0
        for j in range(n):
            if j != i:
                p[i, j] = pi[k]
                k += 1
    return p


def tsne_grad(object po, object yo):
    """KL(P || Q) and its gradient in y for a Student-t low-dim kernel."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.ascontiguousarray(po, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] y = np.ascontiguousarray(yo, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t dim = y.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] num = np.empty((n, n), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.zeros((n, dim), dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double acc, t, z, q, kl, pq, tiny
    tiny = 1e-300
    z = 0.0
    for i in range(n):
        num[i, i] = 0.0
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(dim):
                t = y[i, k] - y[j, k]
                acc += t * t
            t = 1.0 / (1.0 + acc)
            num[i, j] = t
            num[j, i] = t
            z += 2.0 * t
    kl = 0.0
    for i in range(n):
        for j in range(n):
            if p[i, j] > 0.0:
                q = num[i, j] / z
                if q < tiny:
                    q = tiny
                t = p[i, j]
                if t < tiny:
                    t = tiny
                kl += p[i, j] * (log(t) - log(q))
    for i in range(n):
        for j in range(n):
            pq = (p[i, j] - num[i, j] / z) * num[i, j]
            for k in range(dim):
                grad[i, k] += 4.0 * pq * (y[i, k] - y[j, k])
    return grad, kl


def gmm_estep(object xo, object wo, object mo, object vo):
    """Responsibilities and total log-likelihood of a diagonal GMM."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.ascontiguousarray(xo, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(wo, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] means = np.ascontiguousarray(mo, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] var = np.ascontiguousarray(vo, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t kk = means.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] resp = np.empty((n, kk), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] log_w = np.empty(kk, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] log_det = np.empty(kk, dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double acc, t, m, lse, ll
    for k in range(kk):
        t = w[k]
        if t < 1e-300:
            t = 1e-300
        log_w[k] = log(t)
        acc = 0.0
        for j in range(d):
            acc += log(TWO_PI * var[k, j])
        log_det[k] = acc
    ll = 0.0
    for i in range(n):
        m = -INFINITY
        for k in range(kk):
            acc = 0.0
            for j in range(d):
                t = x[i, j] - means[k, j]
                acc += t * t / var[k, j]
            acc = log_w[k] - 0.5 * (log_det[k] + acc)
            resp[i, k] = acc
            if acc > m:
                m = acc
        acc = 0.0
        for k in range(kk):
            acc += exp(resp[i, k] - m)
        lse = m + log(acc)
        for k in range(kk):
            resp[i, k] = exp(resp[i, k] - lse)
        ll += lse
    return resp, ll
