"""Normalization, Ward linkage, k-means, silhouette, and the k scan.

Cross-oracles: scipy.cluster.hierarchy for the Ward merge table and
sklearn.metrics.silhouette_score for silhouette values. Hand oracles are
worked in the comments where used.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy.cluster import hierarchy as scipy_hierarchy
from sklearn.metrics import silhouette_score

from volprof.cluster import (
    INTERPRETATION_NONE,
    INTERPRETATION_REASONABLE,
    INTERPRETATION_STRONG,
    INTERPRETATION_WEAK,
    avg_silhouette,
    cut_dendrogram,
    cut_to_centroids,
    denormalize,
    hierarchical_cluster,
    interpret_silhouette,
    kmeans,
    range_normalize,
    scan_k,
    wss,
)
from volprof.errors import ConfigError, DataError


def blobs(centers, per_blob, spread, seed, dims=2):
    rng = np.random.default_rng(seed)
    parts = [
        center + rng.normal(0.0, spread, size=(per_blob, dims))
        for center in np.asarray(centers, dtype=float)
    ]
    labels = np.repeat(np.arange(len(centers)), per_blob)
    return np.vstack(parts), labels


class TestRangeNormalize:
    def test_simple_column(self):
        normalized, params = range_normalize(np.array([[0.0], [5.0], [10.0]]))
        assert normalized[:, 0].tolist() == [0.0, 0.5, 1.0]
        assert params.x_min == (0.0,) and params.x_max == (10.0,)

    def test_constant_column_maps_to_zero(self):
        normalized, _ = range_normalize(np.array([[3.0, 1.0], [3.0, 2.0]]))
        assert normalized[:, 0].tolist() == [0.0, 0.0]

    def test_roundtrip(self):
        matrix = np.random.default_rng(1).uniform(-5, 20, size=(40, 4))
        normalized, params = range_normalize(matrix)
        assert np.allclose(denormalize(normalized, params), matrix, atol=1e-12)

    def test_already_normalized_is_fixed_point(self):
        matrix = np.random.default_rng(2).uniform(0, 1, size=(30, 3))
        normalized, _ = range_normalize(matrix)
        again, _ = range_normalize(normalized)
        assert np.allclose(normalized, again, atol=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(DataError, match="non-finite"):
            range_normalize(np.array([[0.0], [np.nan]]))

    def test_rejects_single_row(self):
        with pytest.raises(DataError):
            range_normalize(np.array([[1.0, 2.0]]))


class TestWardLinkage:
    def test_three_point_hand_oracle(self):
        # 1-D points 0, 1, 10. First merge: leaves 0 and 1 at height 1.
        # Lance-Williams for the rest: d2 = (2*100 + 2*81 - 1)/3 = 361/3,
        # height = 19/sqrt(3).
        result = hierarchical_cluster(np.array([[0.0], [1.0], [10.0]]))
        merges = result.dendrogram.merges
        assert len(merges) == 2
        assert {merges[0][0], merges[0][1]} == {0, 1}
        assert merges[0][2] == pytest.approx(1.0)
        assert merges[0][3] == 2
        assert {merges[1][0], merges[1][1]} == {2, 3}
        assert merges[1][2] == pytest.approx(19.0 / np.sqrt(3.0))
        assert merges[1][3] == 3

    def test_matches_scipy_linkage(self):
        matrix = np.random.default_rng(10).uniform(0, 1, size=(30, 4))
        mine = np.array(hierarchical_cluster(matrix).dendrogram.merges)
        reference = scipy_hierarchy.linkage(matrix, method="ward")
        assert np.allclose(mine[:, 2], reference[:, 2], atol=1e-9)
        assert np.array_equal(mine[:, 3], reference[:, 3])

    def test_partition_matches_scipy_fcluster(self):
        matrix = np.random.default_rng(11).uniform(0, 1, size=(40, 3))
        result = hierarchical_cluster(matrix)
        reference = scipy_hierarchy.linkage(matrix, method="ward")
        for k in (2, 3, 4, 5, 6):
            groups = cut_dendrogram(result.dendrogram, k)
            mine = {frozenset(group) for group in groups}
            flat = scipy_hierarchy.fcluster(reference, t=k, criterion="maxclust")
            theirs = {
                frozenset(np.flatnonzero(flat == cluster).tolist())
                for cluster in np.unique(flat)
            }
            assert mine == theirs

    def test_heights_non_decreasing(self):
        matrix = np.random.default_rng(12).normal(size=(50, 4))
        merges = hierarchical_cluster(matrix).dendrogram.merges
        heights = [merge[2] for merge in merges]
        assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))

    def test_subsample_above_cap(self):
        matrix, _ = blobs([[0, 0], [8, 8]], per_blob=50, spread=0.3, seed=13)
        result = hierarchical_cluster(matrix, cap=30, seed=0)
        assert result.sample_indices is not None
        assert len(result.sample_indices) == 30
        assert result.dendrogram.n_leaves == 30
        again = hierarchical_cluster(matrix, cap=30, seed=0)
        assert np.array_equal(result.sample_indices, again.sample_indices)

    def test_cap_validation(self):
        with pytest.raises(ConfigError):
            hierarchical_cluster(np.zeros((5, 2)), cap=1)


class TestCutDendrogram:
    def test_two_pairs(self):
        matrix = np.array([[0.0], [0.1], [10.0], [10.1]])
        result = hierarchical_cluster(matrix)
        groups = cut_dendrogram(result.dendrogram, 2)
        assert groups == [[0, 1], [2, 3]]

    def test_k_bounds(self):
        result = hierarchical_cluster(np.array([[0.0], [1.0], [2.0]]))
        with pytest.raises(ConfigError):
            cut_dendrogram(result.dendrogram, 1)
        with pytest.raises(ConfigError):
            cut_dendrogram(result.dendrogram, 4)

    def test_centroids_are_group_means(self):
        matrix = np.array([[0.0, 0.0], [0.2, 0.0], [5.0, 5.0], [5.2, 5.0]])
        result = hierarchical_cluster(matrix)
        centroids = cut_to_centroids(result, 2, matrix)
        expected = np.array([[0.1, 0.0], [5.1, 5.0]])
        order = np.argsort(centroids[:, 0])
        assert np.allclose(centroids[order], expected, atol=1e-12)

    def test_centroids_through_subsample(self):
        matrix, _ = blobs([[0, 0], [9, 9]], per_blob=60, spread=0.2, seed=14)
        result = hierarchical_cluster(matrix, cap=40, seed=1)
        centroids = cut_to_centroids(result, 2, matrix)
        order = np.argsort(centroids[:, 0])
        assert np.allclose(centroids[order], [[0, 0], [9, 9]], atol=0.3)


class TestWss:
    def test_hand_value(self):
        # {0, 1} around centroid 0.5: 0.25 + 0.25
        value = wss(np.array([[0.0], [1.0]]), np.array([0, 0]), np.array([[0.5]]))
        assert value == pytest.approx(0.5)

    def test_two_clusters(self):
        matrix = np.array([[0.0, 0.0], [0.0, 2.0], [4.0, 0.0]])
        labels = np.array([0, 0, 1])
        centroids = np.array([[0.0, 1.0], [4.0, 0.0]])
        assert wss(matrix, labels, centroids) == pytest.approx(2.0)


class TestKMeans:
    def test_blob_means_are_fixed_point(self):
        matrix, truth = blobs([[0, 0], [10, 10]], per_blob=25, spread=0.3, seed=20)
        start = np.array([matrix[:25].mean(axis=0), matrix[25:].mean(axis=0)])
        fit = kmeans(matrix, start)
        assert fit.converged
        assert fit.iterations <= 2
        same = (fit.labels == truth).all() or (fit.labels == 1 - truth).all()
        assert same

    def test_k_equals_n_zero_wss(self):
        matrix = np.array([[0.0], [1.0], [5.0], [9.0]])
        fit = kmeans(matrix, matrix.copy())
        assert fit.wss == 0.0
        assert sorted(fit.labels.tolist()) == [0, 1, 2, 3]

    def test_history_non_increasing(self):
        matrix = np.random.default_rng(21).uniform(0, 1, size=(200, 4))
        start = matrix[[0, 50, 100, 150]]
        fit = kmeans(matrix, start)
        history = fit.wss_history
        assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_empty_cluster_repaired(self):
        matrix = np.array([[0.0], [0.1], [0.2], [10.0], [10.1], [10.2]])
        start = np.array([[0.1], [100.0], [200.0]])
        fit = kmeans(matrix, start)
        assert len(np.unique(fit.labels)) == 3

    def test_tie_goes_to_lower_cluster_index(self):
        matrix = np.array([[0.0], [0.5], [1.0], [2.0]])
        fit = kmeans(matrix, np.array([[0.0], [1.0]]))
        assert fit.labels.tolist() == [0, 0, 1, 1]

    def test_duplicate_initial_centroids_rejected(self):
        with pytest.raises(ConfigError, match="distinct"):
            kmeans(np.zeros((4, 2)), np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_non_finite_rejected(self):
        with pytest.raises(DataError):
            kmeans(np.array([[np.inf]]), np.array([[0.0]]))

    def test_reaches_exhaustive_optimum_on_tiny_instance(self):
        matrix = np.array([[0.0], [0.2], [0.4], [5.0], [5.2], [5.4]])
        best = np.inf
        for labels in itertools.product((0, 1), repeat=6):
            labels = np.array(labels)
            if len(np.unique(labels)) < 2:
                continue
            centroids = np.array(
                [matrix[labels == c].mean(axis=0) for c in (0, 1)]
            )
            best = min(best, wss(matrix, labels, centroids))
        hierarchy = hierarchical_cluster(matrix)
        fit = kmeans(matrix, cut_to_centroids(hierarchy, 2, matrix))
        assert best == pytest.approx(0.16)
        assert fit.wss == pytest.approx(best, rel=1e-12)


class TestSilhouette:
    def test_interpretation_boundaries(self):
        assert interpret_silhouette(0.71) == INTERPRETATION_STRONG
        assert interpret_silhouette(0.70) == INTERPRETATION_REASONABLE
        assert interpret_silhouette(0.51) == INTERPRETATION_REASONABLE
        assert interpret_silhouette(0.50) == INTERPRETATION_WEAK
        assert interpret_silhouette(0.26) == INTERPRETATION_WEAK
        assert interpret_silhouette(0.25) == INTERPRETATION_NONE

    def test_three_point_hand_oracle(self):
        # points 0, 1, 10 labeled {0, 0, 1}:
        # s(0) = (10 - 1)/10, s(1) = (9 - 1)/9, s(2) singleton -> 0
        matrix = np.array([[0.0], [1.0], [10.0]])
        value, _ = avg_silhouette(matrix, np.array([0, 0, 1]))
        assert value == pytest.approx((0.9 + 8.0 / 9.0) / 3.0, abs=1e-12)

    def test_identical_points_score_zero(self):
        matrix = np.ones((4, 2))
        value, interpretation = avg_silhouette(matrix, np.array([0, 0, 1, 1]))
        assert value == 0.0
        assert interpretation == INTERPRETATION_NONE

    def test_matches_sklearn(self):
        matrix, labels = blobs(
            [[0, 0], [4, 4], [8, 0]], per_blob=40, spread=0.8, seed=30
        )
        value, _ = avg_silhouette(matrix, labels)
        assert value == pytest.approx(
            silhouette_score(matrix, labels), abs=1e-9
        )

    def test_matches_sklearn_across_chunks(self):
        # more rows than the internal chunk size
        matrix, labels = blobs([[0, 0], [6, 6]], per_blob=400, spread=1.0, seed=31)
        value, _ = avg_silhouette(matrix, labels)
        assert value == pytest.approx(silhouette_score(matrix, labels), abs=1e-9)

    def test_noncontiguous_label_ids(self):
        matrix, labels = blobs([[0, 0], [5, 5]], per_blob=20, spread=0.3, seed=32)
        relabeled = np.where(labels == 0, 7, 99)
        value_a, _ = avg_silhouette(matrix, labels)
        value_b, _ = avg_silhouette(matrix, relabeled)
        assert value_a == pytest.approx(value_b, abs=1e-12)

    def test_single_cluster_rejected(self):
        with pytest.raises(DataError):
            avg_silhouette(np.zeros((5, 2)), np.zeros(5, dtype=int))


class TestScanK:
    def test_three_blobs_suggest_three(self):
        matrix, _ = blobs(
            [[0, 0], [10, 0], [5, 9]], per_blob=30, spread=0.5, seed=40
        )
        normalized, _ = range_normalize(matrix)
        report = scan_k(normalized, k_range=(2, 6), seed=0)
        assert report.suggested_k == 3
        assert report.elbow_k == 3
        assert report.interpretation == INTERPRETATION_STRONG
        assert [entry.k for entry in report.entries] == [2, 3, 4, 5, 6]

    def test_structureless_cloud_still_reports(self):
        matrix = np.random.default_rng(41).uniform(0, 1, size=(100, 4))
        report = scan_k(matrix, k_range=(2, 6), seed=0)
        assert 2 <= report.suggested_k <= 6
        assert report.interpretation in (
            INTERPRETATION_NONE, INTERPRETATION_WEAK,
        )

    def test_deterministic(self):
        matrix = np.random.default_rng(42).uniform(0, 1, size=(80, 4))
        assert scan_k(matrix, k_range=(2, 5)) == scan_k(matrix, k_range=(2, 5))

    def test_k_range_validation(self):
        matrix = np.random.default_rng(43).uniform(0, 1, size=(10, 2))
        with pytest.raises(ConfigError):
            scan_k(matrix, k_range=(1, 5))
        with pytest.raises(ConfigError):
            scan_k(matrix, k_range=(2, 10))
