"""Scoring of hypothesized blindspots against ground truth.

All operations are set algebra over image ids. A hypothesis "belongs" to a
true blindspot when its precision against it clears lambda_p; a true
blindspot is "covered" when the union of belonging hypotheses recalls at
least lambda_r of it. The discovery rate averages cover indicators; the
false discovery rate is computed over the shortest list prefix achieving
the full list's discovery rate, and is undefined when nothing was
discovered. Uncovered blindspots get a per-image failure breakdown.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import EmptyHypothesis, EmptyTruth, ValidationError
from .scenegen.io import canonical_json

FAILURE_CATEGORIES = ("not_returned", "found", "merged", "impure")


@dataclass(frozen=True)
class MetricThresholds:
    lambda_p: float = 0.8
    lambda_r: float = 0.8

    def __post_init__(self):
        for name, v in (("lambda_p", self.lambda_p), ("lambda_r", self.lambda_r)):
            if not 0.0 < v <= 1.0:
                raise ValidationError(f"{name} must be in (0, 1], got {v}")

    @classmethod
    def synthetic(cls) -> "MetricThresholds":
        return cls(lambda_p=0.8, lambda_r=0.8)

    @classmethod
    def real(cls) -> "MetricThresholds":
        return cls(lambda_p=0.5, lambda_r=0.5)

    def to_json(self) -> dict:
        return {"lambda_p": self.lambda_p, "lambda_r": self.lambda_r}

    @classmethod
    def from_json(cls, obj: dict) -> "MetricThresholds":
        return cls(**obj)


def _as_sets(hyps) -> list[frozenset[int]]:
    """Accept a HypothesizedBlindspotList or any iterable of id sets."""
    if hasattr(hyps, "sets"):
        return list(hyps.sets())
    return [frozenset(h) for h in hyps]


def bp(hyp: Iterable[int], truth: Iterable[int]) -> float:
    """Precision of a hypothesis: fraction of its images inside the truth."""
    hyp = frozenset(hyp)
    if not hyp:
        raise EmptyHypothesis("blindspot precision is undefined for an empty hypothesis")
    truth = frozenset(truth)
    return len(hyp & truth) / len(hyp)


def br(hyps, truth: Iterable[int], lambda_p: float) -> float:
    """Recall of a true blindspot by the union of belonging hypotheses."""
    truth = frozenset(truth)
    if not truth:
        raise EmptyTruth("blindspot recall is undefined for an empty truth")
    union: set[int] = set()
    for h in _as_sets(hyps):
        if bp(h, truth) >= lambda_p:
            union |= h
    return len(union & truth) / len(truth)


def covers(hyps, truth: Iterable[int], thresholds: MetricThresholds) -> bool:
    return br(hyps, truth, thresholds.lambda_p) >= thresholds.lambda_r


def dr(hyps, truths: Sequence[Iterable[int]], thresholds: MetricThresholds) -> float:
    """Fraction of true blindspots covered by the hypothesis list."""
    if not truths:
        raise EmptyTruth("discovery rate needs at least one true blindspot")
    return sum(covers(hyps, t, thresholds) for t in truths) / len(truths)


def _covered_count(hyp_sets: list[frozenset[int]], truths, thresholds: MetricThresholds) -> int:
    return sum(
        br(hyp_sets, t, thresholds.lambda_p) >= thresholds.lambda_r for t in truths
    )


def top_u(hyps, truths: Sequence[Iterable[int]], thresholds: MetricThresholds) -> int:
    """Smallest prefix length of the ordered list achieving the full list's
    covered count; zero when the list covers nothing."""
    hyp_sets = _as_sets(hyps)
    if not hyp_sets:
        raise ValidationError("top_u is undefined for an empty hypothesis list")
    full = _covered_count(hyp_sets, truths, thresholds)
    for u in range(len(hyp_sets) + 1):
        if _covered_count(hyp_sets[:u], truths, thresholds) == full:
            return u
    return len(hyp_sets)


def fdr(hyps, truths: Sequence[Iterable[int]], thresholds: MetricThresholds) -> float | None:
    """Fraction of the top-u hypotheses belonging to no true blindspot, or
    None when the discovery rate is zero (such runs are excluded from FDR
    aggregation)."""
    if not truths:
        raise EmptyTruth("false discovery rate needs at least one true blindspot")
    hyp_sets = _as_sets(hyps)
    if not hyp_sets or _covered_count(hyp_sets, truths, thresholds) == 0:
        return None
    u = top_u(hyp_sets, truths, thresholds)
    truth_sets = [frozenset(t) for t in truths]
    false_count = sum(
        max(bp(h, t) for t in truth_sets) < thresholds.lambda_p for h in hyp_sets[:u]
    )
    return false_count / u


def failure_breakdown(
    hyps, truths: Sequence[Iterable[int]], thresholds: MetricThresholds
) -> dict[int, dict[str, float]]:
    """Per-image failure fractions for each uncovered true blindspot.

    Each image in an uncovered truth falls into exactly one category, the
    first that matches: not_returned (in no hypothesis), found (some
    containing hypothesis is pure for this truth), merged (some containing
    hypothesis is pure for the union of all truths), impure (every
    containing hypothesis fails even that). Keyed by index into truths.
    """
    hyp_sets = _as_sets(hyps)
    truth_sets = [frozenset(t) for t in truths]
    union_truth = frozenset().union(*truth_sets) if truth_sets else frozenset()
    out: dict[int, dict[str, float]] = {}
    for m, truth in enumerate(truth_sets):
        if br(hyp_sets, truth, thresholds.lambda_p) >= thresholds.lambda_r:
            continue
        counts = dict.fromkeys(FAILURE_CATEGORIES, 0)
        for i in truth:
            containing = [h for h in hyp_sets if i in h]
            if not containing:
                counts["not_returned"] += 1
            elif any(bp(h, truth) >= thresholds.lambda_p for h in containing):
                counts["found"] += 1
            elif any(bp(h, union_truth) >= thresholds.lambda_p for h in containing):
                counts["merged"] += 1
            else:
                counts["impure"] += 1
        out[m] = {cat: counts[cat] / len(truth) for cat in FAILURE_CATEGORIES}
    return out


def mean_failure_fractions(
    breakdowns: Iterable[dict[str, float]],
) -> dict[str, float] | None:
    """Average the four fractions over a collection of breakdowns; None when
    the collection is empty (nothing was uncovered)."""
    items = list(breakdowns)
    if not items:
        return None
    return {
        cat: sum(b[cat] for b in items) / len(items) for cat in FAILURE_CATEGORIES
    }


def aggregate(values: Sequence[float], interval: str = "se") -> dict[str, float]:
    """Mean with a 1.96-interval. interval="se" uses the standard error
    (sample SD / sqrt(n), 0 when n = 1); interval="sd" uses the SD itself."""
    if not values:
        raise ValidationError("aggregate needs at least one value")
    if interval not in ("se", "sd"):
        raise ValidationError(f"interval must be 'se' or 'sd', got {interval!r}")
    n = len(values)
    mean = sum(values) / n
    if n > 1:
        var = sum((v - mean) ** 2 for v in values) / (n - 1)
        sd = math.sqrt(var)
    else:
        sd = 0.0
    se = sd / math.sqrt(n)
    half = 1.96 * (se if interval == "se" else sd)
    return {
        "mean": mean,
        "standard_error": se,
        "ci_low": mean - half,
        "ci_high": mean + half,
    }


@dataclass(frozen=True)
class BlindspotRecord:
    """One true blindspot's outcome in one run, carrying enough of its
    definition for factor analyses."""

    ec_id: str
    blindspot_id: int
    triplets: tuple
    br: float
    covered: bool


def factor_grouping(
    records: Sequence[BlindspotRecord], predicate: Callable
) -> dict:
    """Group records by predicate(record) and aggregate cover indicators
    per group. Groups nobody maps to are absent, not zero."""
    groups: dict = {}
    for rec in records:
        groups.setdefault(predicate(rec), []).append(1.0 if rec.covered else 0.0)
    return {
        label: {"n": len(vals), **aggregate(vals)} for label, vals in groups.items()
    }


def by_triplet_count(rec: BlindspotRecord) -> int:
    return len(rec.triplets)


def has_key(layer: str, attribute: str) -> Callable[[BlindspotRecord], bool]:
    def predicate(rec: BlindspotRecord) -> bool:
        return any(t.layer == layer and t.attribute == attribute for t in rec.triplets)

    return predicate


def has_attribute(attribute: str) -> Callable[[BlindspotRecord], bool]:
    def predicate(rec: BlindspotRecord) -> bool:
        return any(t.attribute == attribute for t in rec.triplets)

    return predicate


def has_triplet(layer: str, attribute: str, value) -> Callable[[BlindspotRecord], bool]:
    def predicate(rec: BlindspotRecord) -> bool:
        return any(
            t.layer == layer and t.attribute == attribute and t.value == value
            for t in rec.triplets
        )

    return predicate


@dataclass(frozen=True)
class MetricReport:
    """Full scoring of one hypothesis list against one EC's ground truth."""

    thresholds: MetricThresholds
    n_hypotheses: int
    truth_sizes: tuple[int, ...]
    per_truth_br: tuple[float, ...]
    covered: tuple[bool, ...]
    dr: float
    fdr: float | None
    top_u: int | None
    best_bp: tuple[float, ...]  # per hypothesis, max over truths
    failures: tuple[tuple[int, dict[str, float]], ...]  # uncovered truths only

    @property
    def failure_fractions(self) -> dict[str, float] | None:
        return mean_failure_fractions(b for _, b in self.failures)

    def to_json(self) -> dict:
        return {
            "thresholds": self.thresholds.to_json(),
            "n_hypotheses": self.n_hypotheses,
            "truth_sizes": list(self.truth_sizes),
            "per_truth_br": list(self.per_truth_br),
            "covered": list(self.covered),
            "dr": self.dr,
            "fdr": self.fdr,
            "top_u": self.top_u,
            "best_bp": list(self.best_bp),
            "failures": [
                {"truth_index": m, **fractions} for m, fractions in self.failures
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MetricReport":
        failures = tuple(
            (
                int(entry["truth_index"]),
                {cat: float(entry[cat]) for cat in FAILURE_CATEGORIES},
            )
            for entry in obj["failures"]
        )
        return cls(
            thresholds=MetricThresholds.from_json(obj["thresholds"]),
            n_hypotheses=int(obj["n_hypotheses"]),
            truth_sizes=tuple(int(v) for v in obj["truth_sizes"]),
            per_truth_br=tuple(float(v) for v in obj["per_truth_br"]),
            covered=tuple(bool(v) for v in obj["covered"]),
            dr=float(obj["dr"]),
            fdr=None if obj["fdr"] is None else float(obj["fdr"]),
            top_u=None if obj["top_u"] is None else int(obj["top_u"]),
            best_bp=tuple(float(v) for v in obj["best_bp"]),
            failures=failures,
        )

    def canonical(self) -> str:
        return canonical_json(self.to_json())


def compute_report(
    hyps, truths: Sequence[Iterable[int]], thresholds: MetricThresholds
) -> MetricReport:
    """Score an ordered hypothesis list against the true blindspots."""
    hyp_sets = _as_sets(hyps)
    truth_sets = [frozenset(t) for t in truths]
    if not truth_sets:
        raise EmptyTruth("cannot score against zero true blindspots")
    per_truth = tuple(br(hyp_sets, t, thresholds.lambda_p) for t in truth_sets)
    covered = tuple(v >= thresholds.lambda_r for v in per_truth)
    dr_val = sum(covered) / len(covered)
    fdr_val = fdr(hyp_sets, truth_sets, thresholds)
    u = top_u(hyp_sets, truth_sets, thresholds) if fdr_val is not None else None
    best = tuple(max(bp(h, t) for t in truth_sets) for h in hyp_sets)
    breakdown = failure_breakdown(hyp_sets, truth_sets, thresholds)
    return MetricReport(
        thresholds=thresholds,
        n_hypotheses=len(hyp_sets),
        truth_sizes=tuple(len(t) for t in truth_sets),
        per_truth_br=per_truth,
        covered=covered,
        dr=dr_val,
        fdr=fdr_val,
        top_u=u,
        best_bp=best,
        failures=tuple(sorted(breakdown.items())),
    )
