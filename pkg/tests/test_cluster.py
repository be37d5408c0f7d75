"""Mixture fitting, model selection, and hypothesis ranking."""

import json

import numpy as np
import pytest

from spotcheck.cluster import (
    EM_TOL,
    VARIANCE_FLOOR,
    GmmFit,
    Hypothesis,
    HypothesizedBlindspotList,
    PlanespotConfig,
    bic,
    build_features,
    fit_gmm,
    kmeanspp_init,
    planespot,
    rank_clusters,
    read_hypotheses,
    select_k_bic,
    write_hypotheses,
)
from spotcheck.errors import (
    DimensionMismatch,
    ImportFormatError,
    ValidationError,
)
from spotcheck.models.outputs import ModelOutputs


def blobs(rng, centers, n_per, scale=0.05):
    """Well-separated Gaussian blobs around the given centers."""
    parts = [c + scale * rng.standard_normal((n_per, len(c))) for c in centers]
    return np.concatenate(parts)


class TestFeatures:
    def test_third_column_is_weighted_confidence(self):
        sbar = np.array([[0.0, 0.5], [1.0, 0.25]])
        h = np.array([1.0, 0.4])
        feats = build_features(sbar, h, w=0.1)
        assert np.allclose(feats.r[:, 2], [0.1, 0.04])
        assert np.allclose(feats.r[:, :2], sbar)

    def test_zero_weight_collapses_third_column(self):
        feats = build_features(np.zeros((3, 2)), np.array([0.1, 0.9, 0.5]), w=0.0)
        assert np.all(feats.r[:, 2] == 0.0)

    def test_shape_and_range_validation(self):
        with pytest.raises(DimensionMismatch):
            build_features(np.zeros((3, 3)), np.zeros(3), 0.1)
        with pytest.raises(DimensionMismatch):
            build_features(np.zeros((3, 2)), np.zeros(4), 0.1)
        with pytest.raises(ValidationError):
            build_features(np.zeros((3, 2)), np.array([0.0, 0.5, 1.2]), 0.1)
        with pytest.raises(ValidationError):
            build_features(np.zeros((3, 2)), np.zeros(3), -0.1)


class TestKmeansppInit:
    def test_centers_are_data_points(self):
        rng = np.random.default_rng(0)
        x = rng.random((50, 3))
        centers = kmeanspp_init(x, 4, np.random.default_rng(1))
        for c in centers:
            assert any(np.array_equal(c, row) for row in x)

    def test_deterministic_given_rng_state(self):
        x = np.random.default_rng(2).random((40, 2))
        a = kmeanspp_init(x, 5, np.random.default_rng(7))
        b = kmeanspp_init(x, 5, np.random.default_rng(7))
        assert np.array_equal(a, b)


class TestEmFit:
    def test_monotone_log_likelihood_fuzz(self):
        """One hundred randomized fits: the log-likelihood must never
        decrease between EM iterations, with no empty-component resets."""
        rng = np.random.default_rng(42)
        for run in range(100):
            n = int(rng.integers(30, 120))
            f = int(rng.integers(1, 4))
            k = int(rng.integers(1, 5))
            x = rng.standard_normal((n, f)) * rng.random() * 3
            fit = fit_gmm(x, k, seed=run, n_init=1)
            assert fit.reinit_count == 0, f"run {run} hit an empty component"
            diffs = np.diff(fit.ll_history)
            assert np.all(diffs >= -1e-9), f"run {run}: LL decreased by {diffs.min()}"

    def test_converged_flag_and_tolerance(self):
        rng = np.random.default_rng(3)
        x = blobs(rng, [(0, 0), (5, 5)], 100)
        fit = fit_gmm(x, 2, seed=0)
        assert fit.converged
        assert fit.ll_history[-1] - fit.ll_history[-2] < EM_TOL

    def test_variance_floor_enforced(self):
        x = np.zeros((20, 2))  # degenerate: zero spread
        x[10:] += 10.0
        fit = fit_gmm(x, 2, seed=0)
        assert np.all(fit.variances >= VARIANCE_FLOOR)

    def test_recovers_separated_blobs(self):
        rng = np.random.default_rng(9)
        x = blobs(rng, [(0, 0), (10, 0), (0, 10)], 50)
        fit = fit_gmm(x, 3, seed=4)
        labels = fit.hard_assignments()
        for start in (0, 50, 100):
            block = labels[start : start + 50]
            assert (block == block[0]).all()
        assert np.allclose(np.sort(fit.weights), [1 / 3] * 3, atol=0.01)

    def test_responsibility_rows_sum_to_one(self):
        rng = np.random.default_rng(12)
        x = rng.random((60, 3))
        fit = fit_gmm(x, 4, seed=2)
        assert np.allclose(fit.responsibilities.sum(axis=1), 1.0)

    def test_restarts_pick_best_likelihood(self):
        rng = np.random.default_rng(21)
        x = blobs(rng, [(0, 0), (6, 6), (0, 6), (6, 0)], 40)
        single = max(
            fit_gmm(x, 4, seed=17, n_init=1).log_likelihood for _ in range(1)
        )
        multi = fit_gmm(x, 4, seed=17, n_init=5).log_likelihood
        assert multi >= single - 1e-9

    def test_matches_sklearn_on_separated_data(self):
        sklearn = pytest.importorskip("sklearn.mixture")
        rng = np.random.default_rng(8)
        x = blobs(rng, [(0, 0, 0), (8, 8, 8)], 150)
        fit = fit_gmm(x, 2, seed=0)
        ref = sklearn.GaussianMixture(
            n_components=2,
            covariance_type="diag",
            reg_covar=VARIANCE_FLOOR,
            n_init=3,
            random_state=0,
        ).fit(x)
        ours = fit.log_likelihood / len(x)
        theirs = ref.score(x)
        assert abs(ours - theirs) < 1e-3


class TestBic:
    def test_closed_form_at_one_component(self):
        """K=1 EM is a single maximum-likelihood Gaussian, so the BIC has a
        closed form from the per-column variances."""
        rng = np.random.default_rng(5)
        x = rng.standard_normal((200, 3)) * np.array([1.0, 2.0, 0.5])
        fit = fit_gmm(x, 1, seed=0)
        n, f = x.shape
        var = np.maximum(x.var(axis=0), VARIANCE_FLOOR)
        ll = -0.5 * n * np.sum(np.log(2.0 * np.pi * var) + 1.0)
        expected = 2 * f * np.log(n) - 2.0 * ll
        assert abs(bic(fit.log_likelihood, 1, f, n) - expected) < 1e-9

    def test_parameter_count_grows_with_k(self):
        assert bic(0.0, 2, 3, 100) - bic(0.0, 1, 3, 100) == pytest.approx(
            7 * np.log(100)
        )

    def test_select_k_finds_blob_count(self):
        rng = np.random.default_rng(14)
        x = blobs(rng, [(0, 0, 0), (5, 0, 0), (0, 5, 0)], 60, scale=0.1)
        fit = select_k_bic(x, k_max=8, seed=3)
        assert fit.k == 3
        assert fit.bic is not None
        assert len(fit.bic_table) == 8
        ks = [k for k, _ in fit.bic_table]
        assert ks == list(range(1, 9))
        best_k = min(fit.bic_table, key=lambda kv: kv[1])[0]
        assert best_k == fit.k

    def test_select_k_validates_range(self):
        x = np.random.default_rng(0).random((10, 2))
        with pytest.raises(ValidationError):
            select_k_bic(x, k_max=0, seed=0)
        with pytest.raises(ValidationError):
            select_k_bic(x, k_max=10, seed=0)


class TestRanking:
    def _fit_for(self, assignments, k):
        """A degenerate GmmFit carrying only hard responsibilities."""
        n = len(assignments)
        resp = np.zeros((n, k))
        resp[np.arange(n), assignments] = 1.0
        return GmmFit(
            k=k,
            weights=np.full(k, 1 / k),
            means=np.zeros((k, 3)),
            variances=np.ones((k, 3)),
            log_likelihood=0.0,
            responsibilities=resp,
            n_iter=1,
            converged=True,
            ll_history=(0.0,),
            reinit_count=0,
        )

    def test_importance_is_error_rate_times_error_count(self):
        # cluster 0: 2 of 4 errors -> 0.5 * 2 = 1.0
        # cluster 1: 3 of 3 errors -> 1.0 * 3 = 3.0
        assignments = [0, 0, 0, 0, 1, 1, 1]
        h = np.array([0.9, 0.9, 0.1, 0.2, 0.3, 0.1, 0.4])
        fit = self._fit_for(assignments, 2)
        ranked = rank_clusters(fit, h)
        assert ranked.hypotheses[0].image_ids == frozenset({4, 5, 6})
        assert ranked.hypotheses[0].importance == pytest.approx(3.0)
        assert ranked.hypotheses[1].importance == pytest.approx(1.0)

    def test_untruncated_output_partitions_inputs(self):
        rng = np.random.default_rng(2)
        assignments = rng.integers(0, 5, size=40)
        assignments[:5] = np.arange(5)  # every cluster non-empty
        h = rng.random(40)
        fit = self._fit_for(assignments, 5)
        ranked = rank_clusters(fit, h)
        union = set()
        total = 0
        for hyp in ranked.hypotheses:
            union |= hyp.image_ids
            total += len(hyp.image_ids)
        assert union == set(range(40))
        assert total == 40

    def test_empty_clusters_dropped(self):
        assignments = [0, 0, 2, 2]  # cluster 1 empty
        fit = self._fit_for(assignments, 3)
        ranked = rank_clusters(fit, np.array([0.1, 0.2, 0.9, 0.9]))
        assert len(ranked.hypotheses) == 2

    def test_tie_broken_by_cluster_index(self):
        assignments = [0, 1]
        fit = self._fit_for(assignments, 2)
        ranked = rank_clusters(fit, np.array([0.1, 0.1]))  # equal importance
        assert ranked.hypotheses[0].image_ids == frozenset({0})

    def test_custom_ids_and_k_return(self):
        assignments = [0, 0, 1, 1, 2, 2]
        fit = self._fit_for(assignments, 3)
        h = np.array([0.0, 0.0, 0.4, 0.6, 1.0, 1.0])
        ranked = rank_clusters(fit, h, image_ids=(10, 11, 20, 21, 30, 31), k_return=2)
        assert len(ranked.hypotheses) == 2
        assert ranked.hypotheses[0].image_ids == frozenset({10, 11})


class TestHypothesisList:
    def _list(self):
        return HypothesizedBlindspotList(
            hypotheses=(
                Hypothesis(rank=1, importance=3.0, image_ids=frozenset({1, 2})),
                Hypothesis(rank=2, importance=1.0, image_ids=frozenset({3})),
            )
        )

    def test_rank_contiguity_enforced(self):
        with pytest.raises(ValidationError):
            HypothesizedBlindspotList(
                hypotheses=(Hypothesis(rank=2, importance=1.0, image_ids=frozenset({1})),)
            )

    def test_importance_must_be_non_increasing(self):
        with pytest.raises(ValidationError):
            HypothesizedBlindspotList(
                hypotheses=(
                    Hypothesis(rank=1, importance=1.0, image_ids=frozenset({1})),
                    Hypothesis(rank=2, importance=2.0, image_ids=frozenset({2})),
                )
            )

    def test_truncated(self):
        hl = self._list()
        assert len(hl.truncated(1).hypotheses) == 1
        assert len(hl.truncated(None).hypotheses) == 2
        assert len(hl.truncated(10).hypotheses) == 2

    def test_json_round_trip(self, tmp_path):
        hl = self._list()
        path = tmp_path / "hyps.json"
        write_hypotheses(path, hl)
        clone = read_hypotheses(path)
        assert clone == hl

    def test_unknown_ids_rejected_on_import(self, tmp_path):
        path = tmp_path / "hyps.json"
        write_hypotheses(path, self._list())
        with pytest.raises(ImportFormatError) as err:
            read_hypotheses(path, known_ids=(1, 2))
        assert "3" in str(err.value)

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps([{"rank": 1}]))
        with pytest.raises(ImportFormatError):
            read_hypotheses(path)
        path.write_text(json.dumps([{"rank": 1, "importance": 1.0, "image_ids": []}]))
        with pytest.raises(ImportFormatError):
            read_hypotheses(path)

    def test_empty_list_parses(self, tmp_path):
        # a method returning nothing is a scoreable (all-miss) outcome
        path = tmp_path / "empty.json"
        path.write_text("[]")
        assert read_hypotheses(path).hypotheses == ()


def synthetic_outputs(seed=0, n_correct=300, n_err_a=40, n_err_b=40):
    """Outputs with two error blobs at separated representation corners."""
    rng = np.random.default_rng(seed)
    d = 6
    reps = np.concatenate(
        [
            rng.standard_normal((n_correct, d)) * 0.3,
            np.tile([4.0, -4.0, 4.0, 0, 0, 0], (n_err_a, 1))
            + rng.standard_normal((n_err_a, d)) * 0.2,
            np.tile([-4.0, 4.0, -4.0, 0, 0, 0], (n_err_b, 1))
            + rng.standard_normal((n_err_b, d)) * 0.2,
        ]
    )
    conf = np.concatenate(
        [
            0.9 + 0.05 * rng.random(n_correct),
            0.1 * rng.random(n_err_a),
            0.1 * rng.random(n_err_b),
        ]
    )
    n = n_correct + n_err_a + n_err_b
    return ModelOutputs(
        image_ids=tuple(range(n)), representations=reps, confidences=conf
    )


class TestPlanespot:
    def test_recovers_planted_error_blobs(self):
        outputs = synthetic_outputs()
        result = planespot(outputs, PlanespotConfig(use_pca=True), seed=0)
        truth_a = frozenset(range(300, 340))
        truth_b = frozenset(range(340, 380))
        top2 = [h.image_ids for h in result.hypotheses.hypotheses[:2]]
        found = {t for t in (truth_a, truth_b) for h in top2 if len(h & t) / len(h) >= 0.8}
        assert found == {truth_a, truth_b}

    def test_untruncated_partitions_and_bounds(self):
        outputs = synthetic_outputs(seed=3)
        cfg = PlanespotConfig(use_pca=True, k_return=3)
        result = planespot(outputs, cfg, seed=1)
        assert len(result.hypotheses.hypotheses) <= 3
        union = frozenset().union(*(h.image_ids for h in result.untruncated.hypotheses))
        assert union == frozenset(outputs.image_ids)
        assert result.selected_k == result.gmm.k

    def test_deterministic_given_seed(self):
        outputs = synthetic_outputs(seed=5)
        cfg = PlanespotConfig(use_pca=True)
        a = planespot(outputs, cfg, seed=9)
        b = planespot(outputs, cfg, seed=9)
        assert a.hypotheses == b.hypotheses
        assert np.array_equal(a.embedding.normalized, b.embedding.normalized)

    def test_config_round_trip(self):
        cfg = PlanespotConfig(w=0.1, k_max=6, use_pca=True)
        clone = PlanespotConfig.from_json(cfg.to_json())
        assert clone == cfg

    def test_partial_config_parses(self):
        cfg = PlanespotConfig.from_json({"w": 0.05})
        assert cfg.w == 0.05 and cfg.k_max == 12
