"""Compare the compiled and pure-Python backends on the four hot kernels.

Run:  python3 benchmarks/bench_kernels.py [--sizes small|full]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from spotcheck import backend
from spotcheck.backend import load_backend


def timeit(fn, *args, repeats: int = 5) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(name: str, impls: dict, args: tuple, repeats: int) -> dict:
    row = {"kernel": name}
    for label, module in impls.items():
        row[label] = timeit(getattr(module, name), *args, repeats=repeats)
    return row


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", choices=["small", "full"], default="full")
    args = parser.parse_args()

    n, d = (200, 16) if args.sizes == "small" else (1000, 32)
    rng = np.random.default_rng(0)
    x = rng.standard_normal((n, d))
    sq = np.maximum(
        (x * x).sum(1)[:, None] + (x * x).sum(1)[None, :] - 2.0 * (x @ x.T), 0.0
    )
    y = rng.standard_normal((n, 2))
    p = rng.random((n, n))
    p = (p + p.T) / p.sum()
    r3 = rng.standard_normal((n, 3))
    means = rng.standard_normal((8, 3))
    variances = rng.random((8, 3)) + 0.1
    weights = np.full(8, 1.0 / 8)

    compiled = load_backend(pure_python=False)
    pure = load_backend(pure_python=True)
    if compiled is pure:
        print("compiled backend unavailable; benchmarking pure Python against itself")
    impls = {"compiled": compiled, "pure": pure}

    cases = [
        ("pairwise_sq_dists", (x,)),
        ("perplexity_search", (sq, 30.0)),
        ("tsne_grad", (p, y)),
        ("gmm_estep", (r3, weights, means, variances)),
    ]
    repeats = 5 if args.sizes == "small" else 3
    print(f"n={n} d={d} (active backend: {backend.BACKEND_NAME})")
    print(f"{'kernel':<20} {'compiled':>12} {'pure':>12} {'speedup':>9}")
    for name, case_args in cases:
        row = bench_case(name, impls, case_args, repeats)
        speedup = row["pure"] / row["compiled"]
        print(
            f"{name:<20} {row['compiled'] * 1e3:>10.2f}ms {row['pure'] * 1e3:>10.2f}ms"
            f" {speedup:>8.1f}x"
        )


if __name__ == "__main__":
    main()
