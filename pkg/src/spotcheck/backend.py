"""Kernel backend selection.

Imports the compiled extension when present, otherwise the numpy
fallback. Set SPOTCHECK_PURE_PYTHON=1 to force the fallback. Results are
bit-reproducible within a backend; across backends they agree to
floating-point roundoff only.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("SPOTCHECK_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND_NAME = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND_NAME = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND_NAME = "python"

pairwise_sq_dists = _impl.pairwise_sq_dists
perplexity_search = _impl.perplexity_search
tsne_grad = _impl.tsne_grad
gmm_estep = _impl.gmm_estep


def load_backend(pure_python: bool):
    """Fetch a specific backend module regardless of the active selection
    (benchmarks and equivalence tests compare the two directly)."""
    if pure_python:
        return _kernels_py
    try:
        from . import _kernels

        return _kernels
    except ImportError:
        return _kernels_py


__all__ = [
    "BACKEND_NAME",
    "gmm_estep",
    "load_backend",
    "pairwise_sq_dists",
    "perplexity_search",
    "tsne_grad",
]
