"""Distance metrics, similarity rows, and the three adjacency modes."""

import math

import numpy as np
import pytest

from mtspool.autodiff import Tape, Tensor
from mtspool.errors import ConfigurationError
from mtspool.graphlearn import (
    AdjacencyBuilder,
    dynamic_adjacency,
    pairwise_distance,
    similarity_matrix,
    static_adjacency,
)

from conftest import check_gradients


class TestPairwiseDistance:
    @pytest.mark.parametrize("metric", ["euclidean", "absolute", "dtw"])
    def test_identical_rows_zero(self, metric):
        x = np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
        d = pairwise_distance(x, metric)
        np.testing.assert_array_equal(d, np.zeros((2, 2)))

    def test_three_four_five(self):
        d = pairwise_distance(np.array([[0.0, 0.0], [3.0, 4.0]]), "euclidean")
        assert d[0, 1] == 5.0

    def test_absolute(self):
        d = pairwise_distance(np.array([[0.0, 0.0], [3.0, -4.0]]), "absolute")
        assert d[0, 1] == 7.0

    def test_dtw_hand_example(self):
        d = pairwise_distance(np.array([[1.0, 2.0, 3.0], [2.0, 3.0, 4.0]]), "dtw")
        assert d[0, 1] == 2.0

    @pytest.mark.parametrize("metric", ["euclidean", "absolute", "dtw"])
    def test_symmetric_zero_diag_nonnegative(self, metric, rng):
        x = rng.standard_normal((5, 9))
        d = pairwise_distance(x, metric)
        np.testing.assert_allclose(d, d.T)
        np.testing.assert_array_equal(np.diag(d), np.zeros(5))
        assert np.all(d >= 0.0)

    def test_unknown_metric(self):
        with pytest.raises(ConfigurationError):
            pairwise_distance(np.ones((2, 2)), "manhattan")


class TestSimilarityMatrix:
    def test_identical_rows_uniform(self):
        x = np.tile([[1.0, 2.0]], (4, 1))
        c = similarity_matrix(x, "euclidean")
        np.testing.assert_allclose(c, np.full((4, 4), 0.25), atol=1e-15)

    def test_two_node_softmax_value(self):
        # distance(1,2) == 1 -> row = [e^0, e^-1] / (e^0 + e^-1)
        x = np.array([[0.0], [1.0]])
        c = similarity_matrix(x, "euclidean")
        expect = math.e / (math.e + 1.0)
        np.testing.assert_allclose(c[0], [expect, 1.0 - expect], atol=1e-12)
        np.testing.assert_allclose(c[0], [0.7311, 0.2689], atol=1e-4)

    def test_self_entry_is_row_max(self, rng):
        x = rng.standard_normal((6, 7))
        c = similarity_matrix(x, "euclidean")
        assert np.all(np.argmax(c, axis=1) == np.arange(6))

    def test_rows_sum_to_one_all_positive(self, rng):
        x = rng.standard_normal((5, 11))
        for transform in ("identity", "sqrt", "log1p"):
            c = similarity_matrix(x, "absolute", transform)
            np.testing.assert_allclose(c.sum(axis=1), np.ones(5), atol=1e-12)
            assert np.all(c > 0.0)

    def test_permutation_consistency(self, rng):
        x = rng.standard_normal((5, 8))
        perm = rng.permutation(5)
        p = np.eye(5)[perm]
        c = similarity_matrix(x, "euclidean")
        cp = similarity_matrix(x[perm], "euclidean")
        np.testing.assert_allclose(cp, p @ c @ p.T, atol=1e-12)


class TestDynamicAdjacency:
    def test_identity_weights_keep_stochastic_similarity(self, rng):
        c = similarity_matrix(rng.standard_normal((4, 6)), "euclidean")
        a = dynamic_adjacency(Tensor(c), Tensor(np.eye(4)), c1=0.0, activation="identity")
        np.testing.assert_allclose(a.data, c, atol=1e-12)

    def test_threshold_then_renormalize(self):
        c = Tensor([[0.6, 0.04]])
        a = dynamic_adjacency(c, Tensor(np.eye(2)), c1=0.05, activation="identity")
        np.testing.assert_allclose(a.data, [[1.0, 0.0]])

    def test_all_entries_below_threshold(self, rng):
        c = similarity_matrix(rng.standard_normal((3, 5)), "euclidean")
        a = dynamic_adjacency(Tensor(c), Tensor(np.eye(3)), c1=10.0)
        np.testing.assert_array_equal(a.data, np.zeros((3, 3)))

    def test_oracle_on_random_matrices(self, rng):
        # Direct arithmetic oracle: relu, threshold, row-normalize in numpy.
        for _ in range(100):
            n = int(rng.integers(1, 7))
            c = rng.random((n, n))
            w = rng.standard_normal((n, n))
            c1 = float(rng.choice([0.05, 0.1, 0.2]))
            raw = np.maximum(c @ w, 0.0)
            raw[raw < c1] = 0.0
            sums = raw.sum(axis=1, keepdims=True)
            want = np.where(sums == 0.0, raw, raw / np.where(sums == 0.0, 1.0, sums))
            got = dynamic_adjacency(Tensor(c), Tensor(w), c1)
            np.testing.assert_allclose(got.data, want, atol=1e-12)
            assert np.all(got.data >= 0.0)
            row_sums = got.data.sum(axis=1)
            nonzero = row_sums != 0.0
            np.testing.assert_allclose(row_sums[nonzero], 1.0, atol=1e-9)

    def test_gradient_flows_through_surviving_entries(self, rng):
        c = Tensor(similarity_matrix(rng.standard_normal((3, 6)), "euclidean"))
        w = Tensor(np.eye(3) + 0.01 * rng.standard_normal((3, 3)), requires_grad=True)

        def loss():
            from mtspool import autodiff as ad

            return ad.reduce_sum(ad.tanh(dynamic_adjacency(c, w, c1=0.05)))

        check_gradients(loss, [w], tol=1e-4)


class TestStaticAdjacency:
    def test_all_one(self):
        a = static_adjacency(np.random.default_rng(0).random((4, 5)), "all_one")
        np.testing.assert_array_equal(a, np.full((4, 4), 0.25))

    def test_correlation_of_proportional_rows(self):
        x = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
        centered = x - x.mean(axis=1, keepdims=True)
        unit = centered / np.linalg.norm(centered, axis=1, keepdims=True)
        assert abs(unit[0] @ unit[1]) == pytest.approx(1.0)
        a = static_adjacency(x, "correlation", c1=0.0)
        np.testing.assert_allclose(a, np.full((2, 2), 0.5), atol=1e-12)

    def test_self_correlation_before_normalization(self, rng):
        x = rng.standard_normal((3, 10))
        centered = x - x.mean(axis=1, keepdims=True)
        unit = centered / np.linalg.norm(centered, axis=1, keepdims=True)
        corr = np.abs(unit @ unit.T)
        np.testing.assert_allclose(np.diag(corr), np.ones(3), atol=1e-12)

    def test_zero_variance_row_handled(self):
        x = np.array([[1.0, 1.0, 1.0], [0.0, 1.0, 2.0]])
        a = static_adjacency(x, "correlation", c1=0.0)
        assert np.all(np.isfinite(a))
        # constant row correlates with nothing but keeps its self-loop
        np.testing.assert_allclose(a[0], [1.0, 0.0])

    def test_threshold_applies(self, rng):
        x = rng.standard_normal((4, 30))
        a = static_adjacency(x, "correlation", c1=0.3)
        pre = static_adjacency(x, "correlation", c1=0.0)
        assert np.all((a > 0.0).sum(axis=1) <= (pre > 0.0).sum(axis=1))


class TestAdjacencyBuilder:
    def test_dynamic_mode_has_trainable_parameter(self, rng):
        b = AdjacencyBuilder(4, mode="dynamic", rng=rng)
        params = b.parameters()
        assert set(params) == {"adjacency.w_adj"}
        assert params["adjacency.w_adj"].requires_grad

    def test_static_modes_have_no_parameters(self):
        assert AdjacencyBuilder(4, mode="all_one").parameters() == {}
        assert AdjacencyBuilder(4, mode="correlation").parameters() == {}

    def test_w_adj_init_near_identity(self, rng):
        b = AdjacencyBuilder(5, rng=rng)
        assert np.all(np.abs(b.w_adj.data - np.eye(5)) <= 0.01)

    def test_cache_is_consistent(self, rng):
        b = AdjacencyBuilder(3, mode="dynamic", rng=rng)
        x = rng.standard_normal((3, 7))
        a1 = b.build(x).data
        a2 = b.build(x).data
        np.testing.assert_array_equal(a1, a2)

    def test_build_validates_variable_count(self, rng):
        b = AdjacencyBuilder(3, rng=rng)
        with pytest.raises(ConfigurationError, match="expects 3"):
            b.build(rng.standard_normal((4, 7)))

    def test_rejects_bad_config(self):
        with pytest.raises(ConfigurationError):
            AdjacencyBuilder(3, mode="sparse")
        with pytest.raises(ConfigurationError):
            AdjacencyBuilder(3, metric="cosine")
        with pytest.raises(ConfigurationError):
            AdjacencyBuilder(3, c1=-0.2)
