"""Hypothesis generation from model outputs.

Pipeline: embed representations to 2D, append the weighted confidence as a
third column, cluster with a diagonal-covariance Gaussian mixture whose
component count is picked by BIC, then rank clusters by error mass. The
untruncated ranked list partitions the inputs; truncation to the reporting
cap happens separately so scoring can see both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backend import gmm_estep
from .embed import Embedding2D, ReducerConfig, fit_reducer, reduce_pca2
from .errors import (
    DimensionMismatch,
    ImportFormatError,
    NumericalError,
    ValidationError,
)

VARIANCE_FLOOR = 1e-6
EM_TOL = 1e-6
EM_MAX_ITER = 200
EMPTY_COMPONENT_WEIGHT = 1e-10


@dataclass(frozen=True)
class PlaneSpotFeatures:
    """Cluster-space features: unit-square 2D coordinates with the
    confidence scaled by w in the third column."""

    r: np.ndarray  # (n, 3)
    w: float

    def __len__(self) -> int:
        return self.r.shape[0]


def build_features(sbar: np.ndarray, h: np.ndarray, w: float) -> PlaneSpotFeatures:
    sbar = np.asarray(sbar, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if sbar.ndim != 2 or sbar.shape[1] != 2 or h.shape != (sbar.shape[0],):
        raise DimensionMismatch(f"expected (n, 2) and (n,), got {sbar.shape} and {h.shape}")
    if w < 0:
        raise ValidationError(f"weight must be nonnegative, got {w}")
    if h.size and (h.min() < 0 or h.max() > 1):
        raise ValidationError("confidences must lie in [0, 1]")
    return PlaneSpotFeatures(r=np.column_stack([sbar, w * h]), w=float(w))


@dataclass(frozen=True)
class GmmFit:
    k: int
    weights: np.ndarray  # (k,) simplex
    means: np.ndarray  # (k, f)
    variances: np.ndarray  # (k, f), each >= VARIANCE_FLOOR
    log_likelihood: float
    responsibilities: np.ndarray  # (n, k), rows sum to 1
    n_iter: int
    converged: bool
    ll_history: tuple[float, ...]
    reinit_count: int
    bic: float | None = None
    bic_table: tuple[tuple[int, float], ...] | None = None

    def hard_assignments(self) -> np.ndarray:
        return np.argmax(self.responsibilities, axis=1)


def bic(log_likelihood: float, k: int, n_features: int, n_points: int) -> float:
    """Bayesian information criterion for a diagonal-covariance mixture:
    free parameters = (k - 1) mixing weights + k*f means + k*f variances."""
    p = (k - 1) + k * n_features + k * n_features
    return p * np.log(n_points) - 2.0 * log_likelihood


def kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy seeding: first center uniform, the rest drawn proportionally
    to squared distance from the nearest already-chosen center."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(rng.integers(n))]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = x[idx]
        np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1), out=d2)
    return centers


def _em_once(
    x: np.ndarray, k: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, np.ndarray, int, bool, list[float], int]:
    n, f = x.shape
    means = kmeanspp_init(x, k, rng)
    global_var = np.maximum(x.var(axis=0), VARIANCE_FLOOR)
    variances = np.tile(global_var, (k, 1))
    weights = np.full(k, 1.0 / k)

    resp, ll = gmm_estep(x, weights, means, variances)
    if not np.isfinite(ll):
        raise NumericalError("non-finite log-likelihood at initialization")
    ll_history = [ll]
    reinits = 0
    converged = False
    n_iter = 0
    for _ in range(EM_MAX_ITER):
        n_iter += 1
        nk = resp.sum(axis=0)
        empty = nk < EMPTY_COMPONENT_WEIGHT
        reinit_this_iter = bool(empty.any())
        if reinit_this_iter:
            # A starved component is reseeded at a random data point; this
            # resets the monotone-likelihood baseline.
            for j in np.flatnonzero(empty):
                means[j] = x[int(rng.integers(n))]
                variances[j] = global_var
                nk[j] = 1.0
            reinits += int(empty.sum())
            weights = nk / nk.sum()
            keep = ~empty
            if keep.any():
                means[keep] = (resp[:, keep].T @ x) / nk[keep, None]
                ex2 = (resp[:, keep].T @ (x * x)) / nk[keep, None]
                variances[keep] = np.maximum(ex2 - means[keep] ** 2, VARIANCE_FLOOR)
        else:
            weights = nk / n
            means = (resp.T @ x) / nk[:, None]
            ex2 = (resp.T @ (x * x)) / nk[:, None]
            variances = np.maximum(ex2 - means**2, VARIANCE_FLOOR)
        resp, ll_new = gmm_estep(x, weights, means, variances)
        if not np.isfinite(ll_new):
            raise NumericalError(f"non-finite log-likelihood at EM iteration {n_iter}")
        ll_history.append(ll_new)
        gain = ll_new - ll
        ll = ll_new
        if not reinit_this_iter and gain < EM_TOL:
            converged = True
            break
    return weights, means, variances, ll, resp, n_iter, converged, ll_history, reinits


def fit_gmm(r: np.ndarray, k: int, seed: int, n_init: int = 5) -> GmmFit:
    """Fit a k-component diagonal-covariance Gaussian mixture by EM,
    keeping the best of n_init seeded restarts by final log-likelihood."""
    x = np.asarray(r, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"expected an n x f matrix, got shape {x.shape}")
    n = x.shape[0]
    if k < 1 or n < k:
        raise ValidationError(f"need 1 <= k <= n, got k={k}, n={n}")
    best = None
    for restart in range(n_init):
        rng = np.random.default_rng([int(seed), 13, k, restart])
        result = _em_once(x, k, rng)
        if best is None or result[3] > best[3]:
            best = result
    weights, means, variances, ll, resp, n_iter, converged, ll_history, reinits = best
    return GmmFit(
        k=k,
        weights=weights,
        means=means,
        variances=variances,
        log_likelihood=float(ll),
        responsibilities=resp,
        n_iter=n_iter,
        converged=converged,
        ll_history=tuple(ll_history),
        reinit_count=reinits,
    )


def select_k_bic(r: np.ndarray, k_max: int, seed: int, n_init: int = 5) -> GmmFit:
    """Fit mixtures for k = 1..k_max and return the BIC-minimizing fit,
    with the full (k, BIC) table attached."""
    x = np.asarray(r, dtype=np.float64)
    n, f = x.shape
    if k_max < 1 or n <= k_max:
        raise ValidationError(f"need 1 <= k_max < n, got k_max={k_max}, n={n}")
    best_fit = None
    best_bic = np.inf
    table: list[tuple[int, float]] = []
    for k in range(1, k_max + 1):
        fit = fit_gmm(x, k, seed, n_init=n_init)
        b = float(bic(fit.log_likelihood, k, f, n))
        table.append((k, b))
        if b < best_bic:
            best_bic = b
            best_fit = fit
    return GmmFit(
        k=best_fit.k,
        weights=best_fit.weights,
        means=best_fit.means,
        variances=best_fit.variances,
        log_likelihood=best_fit.log_likelihood,
        responsibilities=best_fit.responsibilities,
        n_iter=best_fit.n_iter,
        converged=best_fit.converged,
        ll_history=best_fit.ll_history,
        reinit_count=best_fit.reinit_count,
        bic=best_bic,
        bic_table=tuple(table),
    )


@dataclass(frozen=True)
class Hypothesis:
    rank: int
    importance: float
    image_ids: frozenset[int]

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "importance": self.importance,
            "image_ids": sorted(self.image_ids),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Hypothesis":
        try:
            rank = int(obj["rank"])
            importance = float(obj["importance"])
            ids = obj["image_ids"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ImportFormatError(f"malformed hypothesis entry: {exc}") from None
        if not isinstance(ids, list) or not ids:
            raise ImportFormatError(f"hypothesis at rank {rank} has no image ids")
        return cls(rank=rank, importance=importance, image_ids=frozenset(int(i) for i in ids))


@dataclass(frozen=True)
class HypothesizedBlindspotList:
    hypotheses: tuple[Hypothesis, ...]

    def __post_init__(self):
        for i, hyp in enumerate(self.hypotheses):
            if hyp.rank != i + 1:
                raise ValidationError(f"hypothesis ranks must be 1..n in order, got {hyp.rank} at {i}")
            if i and hyp.importance > self.hypotheses[i - 1].importance:
                raise ValidationError("importance must be non-increasing with rank")

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __iter__(self):
        return iter(self.hypotheses)

    def sets(self) -> list[frozenset[int]]:
        return [h.image_ids for h in self.hypotheses]

    def truncated(self, k: int | None) -> "HypothesizedBlindspotList":
        if k is None or len(self.hypotheses) <= k:
            return self
        return HypothesizedBlindspotList(hypotheses=self.hypotheses[:k])

    def to_json(self) -> list:
        return [h.to_json() for h in self.hypotheses]

    @classmethod
    def from_json(cls, obj: list, known_ids=None) -> "HypothesizedBlindspotList":
        if not isinstance(obj, list):
            raise ImportFormatError("hypothesis list must be a JSON array")
        hyps = tuple(Hypothesis.from_json(entry) for entry in obj)
        if known_ids is not None:
            known = frozenset(known_ids)
            for hyp in hyps:
                unknown = hyp.image_ids - known
                if unknown:
                    raise ImportFormatError(
                        f"hypothesis at rank {hyp.rank} references unknown image ids "
                        f"{sorted(unknown)[:5]}"
                    )
        try:
            return cls(hypotheses=hyps)
        except ValidationError as exc:
            raise ImportFormatError(str(exc)) from None


def write_hypotheses(path: str | Path, hlist: HypothesizedBlindspotList) -> None:
    with open(path, "w") as f:
        json.dump(hlist.to_json(), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")


def read_hypotheses(path: str | Path, known_ids=None) -> HypothesizedBlindspotList:
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise ImportFormatError(f"{path}: invalid JSON: {exc}") from None
    return HypothesizedBlindspotList.from_json(obj, known_ids=known_ids)


def rank_clusters(
    fit: GmmFit,
    h: np.ndarray,
    error_threshold: float = 0.5,
    image_ids=None,
    k_return: int | None = None,
) -> HypothesizedBlindspotList:
    """Order hard-assigned clusters by importance = error rate x error count,
    where an error is a member with confidence below error_threshold.

    image_ids maps rows to ids (defaults to row indices); empty clusters are
    dropped, so the remaining clusters partition the input rows.
    """
    h = np.asarray(h, dtype=np.float64)
    n = fit.responsibilities.shape[0]
    if h.shape != (n,):
        raise DimensionMismatch(f"expected confidences of shape ({n},), got {h.shape}")
    if image_ids is None:
        image_ids = range(n)
    ids = list(image_ids)
    if len(ids) != n:
        raise DimensionMismatch(f"expected {n} image ids, got {len(ids)}")
    assign = fit.hard_assignments()
    entries = []
    for j in range(fit.k):
        members = np.flatnonzero(assign == j)
        if members.size == 0:
            continue
        errors = int(np.count_nonzero(h[members] < error_threshold))
        importance = (errors / members.size) * errors
        entries.append((importance, j, members))
    entries.sort(key=lambda e: (-e[0], e[1]))
    hyps = tuple(
        Hypothesis(
            rank=i + 1,
            importance=float(importance),
            image_ids=frozenset(int(ids[m]) for m in members),
        )
        for i, (importance, _, members) in enumerate(entries)
    )
    return HypothesizedBlindspotList(hypotheses=hyps).truncated(k_return)


@dataclass(frozen=True)
class PlanespotConfig:
    w: float = 0.025
    k_max: int = 12
    n_init: int = 5
    k_return: int | None = 10
    error_threshold: float = 0.5
    drop_zero_importance: bool = False
    use_pca: bool = False
    reducer: ReducerConfig = field(default_factory=ReducerConfig)

    def to_json(self) -> dict:
        return {
            "w": self.w,
            "k_max": self.k_max,
            "n_init": self.n_init,
            "k_return": self.k_return,
            "error_threshold": self.error_threshold,
            "drop_zero_importance": self.drop_zero_importance,
            "use_pca": self.use_pca,
            "reducer": self.reducer.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PlanespotConfig":
        obj = dict(obj)
        if "reducer" in obj:
            obj["reducer"] = ReducerConfig.from_json(obj["reducer"])
        return cls(**obj)


@dataclass(frozen=True)
class PlanespotResult:
    hypotheses: HypothesizedBlindspotList  # truncated to cfg.k_return
    untruncated: HypothesizedBlindspotList
    embedding: Embedding2D
    features: PlaneSpotFeatures
    gmm: GmmFit

    @property
    def selected_k(self) -> int:
        return self.gmm.k


def planespot(outputs, cfg: PlanespotConfig, seed: int = 0) -> PlanespotResult:
    """Run the full discovery pipeline on model outputs for one split.

    Inputs are expected to be positive-class images only. The untruncated
    hypothesis list partitions the inputs; `hypotheses` applies the
    reporting cap (and, if configured, drops zero-importance clusters).
    """
    g = outputs.representations
    h = outputs.confidences
    n = g.shape[0]
    if cfg.use_pca:
        embedding = reduce_pca2(g)
    else:
        embedding = fit_reducer(g, cfg.reducer, seed).embed(g)
    features = build_features(embedding.normalized, h, cfg.w)
    k_max = min(cfg.k_max, n - 1)
    fit = select_k_bic(features.r, k_max, seed, n_init=cfg.n_init)
    full = rank_clusters(
        fit,
        h,
        error_threshold=cfg.error_threshold,
        image_ids=outputs.image_ids,
    )
    emitted = full
    if cfg.drop_zero_importance:
        kept = tuple(
            Hypothesis(rank=i + 1, importance=h_.importance, image_ids=h_.image_ids)
            for i, h_ in enumerate(hh for hh in full if hh.importance > 0)
        )
        emitted = HypothesizedBlindspotList(hypotheses=kept)
    return PlanespotResult(
        hypotheses=emitted.truncated(cfg.k_return),
        untruncated=full,
        embedding=embedding,
        features=features,
        gmm=fit,
    )
