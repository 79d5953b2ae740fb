import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mappergw.geometry import AmbientMetric, DistanceField, PointCloud, pairwise_distances
from mappergw.mapper import EpsilonGraph, build_cover, build_mapper
from mappergw.metric_measure import MetricMeasureSpace, hausdorff, hausdorff_matrix, mapper_to_mm
from mappergw.sampling import FilterValues, sample_torus, TorusParams, height_filter


def nested_loop_hausdorff(A, B, D):
    """Reference implementation by explicit loops."""
    def directed(X, Y):
        worst = 0.0
        for x in X:
            best = np.inf
            for y in Y:
                best = min(best, D[x][y])
            worst = max(worst, best)
        return worst
    return max(directed(A, B), directed(B, A))


def line(xs):
    return PointCloud(np.asarray(xs, dtype=float)[:, None])


subsets = st.lists(st.integers(0, 19), min_size=1, max_size=8, unique=True)


class TestHausdorff:
    def test_real_line_example(self):
        cloud = line(np.arange(11))
        assert hausdorff([0, 10], [4], cloud) == 6.0

    def test_identity_and_singletons(self):
        cloud = line([0.0, 2.5, 7.0])
        assert hausdorff([0, 1, 2], [0, 1, 2], cloud) == 0.0
        assert hausdorff([0], [2], cloud) == 7.0

    def test_empty_conventions(self):
        cloud = line([0.0, 2.5, 7.0])
        assert hausdorff([1], [], cloud) == 7.0
        assert hausdorff([], [0, 1], cloud) == 7.0
        assert hausdorff([], [], cloud) == 0.0

    def test_empty_uses_diameter_of_whole_cloud(self):
        cloud = sample_torus(TorusParams(), 500, seed=3)
        D = pairwise_distances(cloud)
        assert hausdorff([0, 1], [], cloud) == pytest.approx(D.max(), rel=1e-15)

    @given(subsets, subsets, st.integers(0, 2**16))
    @settings(max_examples=100, deadline=None)
    def test_matches_nested_loops_exactly(self, A, B, seed):
        pts = np.random.default_rng(seed).random((20, 3))
        D = pairwise_distances(PointCloud(pts))
        assert hausdorff(A, B, D) == nested_loop_hausdorff(A, B, D)
        assert hausdorff(A, B, PointCloud(pts)) == pytest.approx(nested_loop_hausdorff(A, B, D), abs=1e-15)

    @given(subsets, subsets, subsets, st.integers(0, 2**16))
    @settings(max_examples=100, deadline=None)
    def test_triangle_inequality(self, A, B, C, seed):
        pts = np.random.default_rng(seed).random((20, 2))
        D = pairwise_distances(PointCloud(pts))
        assert hausdorff(A, C, D) <= hausdorff(A, B, D) + hausdorff(B, C, D) + 1e-12

    @given(subsets, subsets)
    @settings(max_examples=60, deadline=None)
    def test_zero_iff_equal(self, A, B):
        D = pairwise_distances(line(np.arange(20) * 1.0))
        assert (hausdorff(A, B, D) == 0) == (set(A) == set(B))

    def test_geodesic_ambient(self):
        cloud = line([0.0, 1.0, 2.0])
        D = pairwise_distances(cloud, AmbientMetric.geodesic(1.1))
        assert hausdorff([0], [2], D) == pytest.approx(2.0)

    def test_matrix_agrees_with_pairwise_calls(self):
        rng = np.random.default_rng(8)
        cloud = PointCloud(rng.random((60, 3)))
        sets = [rng.choice(60, size=k, replace=False) for k in (1, 3, 5, 8, 13)]
        H = hausdorff_matrix(sets, DistanceField.for_cloud(cloud))
        for i in range(len(sets)):
            for j in range(len(sets)):
                assert H[i, j] == pytest.approx(hausdorff(sets[i], sets[j], cloud), abs=1e-15)
        assert np.array_equal(H, H.T)

    def test_matrix_rejects_empty_sets(self):
        with pytest.raises(ValueError):
            hausdorff_matrix([[0], []], line([0.0, 1.0]))


class TestMetricMeasureSpace:
    def test_valid(self):
        X = MetricMeasureSpace(("a", "b"), [[0, 1], [1, 0]], [0.25, 0.75])
        assert X.size == 2

    @pytest.mark.parametrize("D,w", [
        ([[0, 1], [2, 0]], [0.5, 0.5]),  # asymmetric
        ([[1, 1], [1, 0]], [0.5, 0.5]),  # nonzero diagonal
        ([[0, -1], [-1, 0]], [0.5, 0.5]),  # negative
        ([[0, 1], [1, 0]], [0.5, 0.6]),  # mass
        ([[0, 1], [1, 0]], [1.0, 0.0]),  # zero weight
        ([[0]], [0.5, 0.5]),  # shape
    ])
    def test_invalid(self, D, w):
        with pytest.raises(ValueError):
            MetricMeasureSpace(tuple("ab"[: len(w)]), D, w)

    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        pts = rng.random((5, 2))
        w = rng.random(5)
        X = MetricMeasureSpace(tuple("abcde"), pairwise_distances(PointCloud(pts)), w / w.sum())
        _, json_path = X.save(tmp_path / "space")
        Y = MetricMeasureSpace.load(json_path)
        assert Y.labels == X.labels
        assert Y.D.tobytes() == X.D.tobytes() and Y.w.tobytes() == X.w.tobytes()


class TestMapperToMM:
    def five_points(self):
        xs = np.array([0, 0.25, 0.5, 0.75, 1])
        cloud = line(xs)
        f = FilterValues(xs)
        return cloud, build_mapper(cloud, None, f, build_cover(f, 2, 0.3), EpsilonGraph(0.3))

    def test_five_point_matrix(self):
        cloud, m = self.five_points()
        X = mapper_to_mm(m, cloud)
        np.testing.assert_allclose(X.D, [[0, 0.75, 0.5], [0.75, 0, 0.5], [0.5, 0.5, 0]], atol=1e-15)
        np.testing.assert_allclose(X.w, [0.4, 0.4, 0.2], atol=1e-15)
        assert X.labels == ("v0.0", "v1.0", "e0.0-1.0")

    def test_single_vertex(self):
        cloud = line([0.0, 0.5, 1.0])
        f = FilterValues([0.0, 0.5, 1.0])
        m = build_mapper(cloud, None, f, build_cover(f, 1, 0.3), EpsilonGraph(0.6))
        X = mapper_to_mm(m, cloud)
        assert X.D.tolist() == [[0.0]] and X.w.tolist() == [1.0]

    def test_zero_mass_rows_dropped(self):
        xs = np.array([0.0, 0.45, 0.55, 1.0])
        cloud = line(xs)
        f = FilterValues(xs)
        m = build_mapper(cloud, None, f, build_cover(f, 2, 0.3), EpsilonGraph(0.2))
        X = mapper_to_mm(m, cloud)
        assert X.size == int(np.count_nonzero(m.masses))
        assert X.w.sum() == pytest.approx(1.0, abs=1e-12)

    def test_permutation_invariance(self):
        cloud = sample_torus(TorusParams(), 800, seed=1)
        f = height_filter(cloud, [1.0, 0.0, 0.0])
        m = build_mapper(cloud, None, f, build_cover(f, 5, 0.3), EpsilonGraph(0.25))
        X = mapper_to_mm(m, cloud)
        order = np.random.default_rng(0).permutation(X.size)
        Y = X.permuted(order)
        index = {lab: i for i, lab in enumerate(X.labels)}
        for a, la in enumerate(Y.labels):
            assert Y.w[a] == X.w[index[la]]
            for b, lb in enumerate(Y.labels):
                assert Y.D[a, b] == X.D[index[la], index[lb]]

    def test_cloud_mismatch(self):
        _, m = self.five_points()
        with pytest.raises(ValueError):
            mapper_to_mm(m, line([0.0, 1.0]))
