"""Brute-force reference implementations of the scoring metrics.

Written independently of the package, from the definitions alone, using
plain sets and explicit loops. Used as the oracle for randomized
equivalence testing; deliberately unoptimized.
"""

from __future__ import annotations


def ref_bp(hyp, truth) -> float:
    hyp = set(hyp)
    return len(hyp & set(truth)) / len(hyp)


def ref_br(hyps, truth, lambda_p: float) -> float:
    truth = set(truth)
    union = set()
    for h in hyps:
        if ref_bp(h, truth) >= lambda_p:
            union |= set(h)
    return len(union & truth) / len(truth)


def ref_covered(hyps, truth, lambda_p: float, lambda_r: float) -> bool:
    return ref_br(hyps, truth, lambda_p) >= lambda_r


def ref_dr(hyps, truths, lambda_p: float, lambda_r: float) -> float:
    flags = [ref_covered(hyps, t, lambda_p, lambda_r) for t in truths]
    return sum(flags) / len(flags)


def _covered_count(hyps, truths, lambda_p: float, lambda_r: float) -> int:
    return sum(1 for t in truths if ref_covered(hyps, t, lambda_p, lambda_r))


def ref_top_u(hyps, truths, lambda_p: float, lambda_r: float) -> int:
    """Smallest prefix of the ordered list that covers as many truths as the
    full list."""
    full = _covered_count(hyps, truths, lambda_p, lambda_r)
    for u in range(len(hyps) + 1):
        if _covered_count(hyps[:u], truths, lambda_p, lambda_r) == full:
            return u
    return len(hyps)


def ref_fdr(hyps, truths, lambda_p: float, lambda_r: float) -> float | None:
    """Fraction of the top-u hypotheses that are not precise for any truth;
    undefined (None) when nothing is covered or nothing was returned."""
    if not hyps:
        return None
    if _covered_count(hyps, truths, lambda_p, lambda_r) == 0:
        return None
    u = ref_top_u(hyps, truths, lambda_p, lambda_r)
    false = 0
    for h in hyps[:u]:
        if all(ref_bp(h, t) < lambda_p for t in truths):
            false += 1
    return false / u


def ref_failure_breakdown(hyps, truths, lambda_p: float, lambda_r: float):
    """not_returned / found / merged / impure fractions per uncovered truth,
    first matching category per image."""
    union_truth = set()
    for t in truths:
        union_truth |= set(t)
    out = {}
    for m, truth in enumerate(truths):
        truth = set(truth)
        if ref_covered(hyps, truth, lambda_p, lambda_r):
            continue
        counts = {"not_returned": 0, "found": 0, "merged": 0, "impure": 0}
        for image in truth:
            containing = [set(h) for h in hyps if image in h]
            if not containing:
                counts["not_returned"] += 1
            elif any(ref_bp(h, truth) >= lambda_p for h in containing):
                counts["found"] += 1
            elif any(ref_bp(h, union_truth) >= lambda_p for h in containing):
                counts["merged"] += 1
            else:
                counts["impure"] += 1
        out[m] = {k: v / len(truth) for k, v in counts.items()}
    return out


def random_instance(rng, max_images: int = 64, max_truths: int = 3, max_hyps: int = 10):
    """One randomized scoring problem: non-empty hypothesis and truth sets
    over a small universe, sizes as in the equivalence criterion."""
    n = int(rng.integers(2, max_images + 1))
    universe = list(range(n))
    n_truths = int(rng.integers(1, max_truths + 1))
    n_hyps = int(rng.integers(0, max_hyps + 1))

    def subset(min_size=1):
        size = int(rng.integers(min_size, n + 1))
        return frozenset(int(i) for i in rng.choice(universe, size=size, replace=False))

    truths = [subset() for _ in range(n_truths)]
    hyps = [subset() for _ in range(n_hyps)]
    return hyps, truths
