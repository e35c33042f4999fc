import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rairs.coarse import CoarseQuantizer, kmeans, sq_dists


class TestKMeans:
    def test_single_cluster_is_mean(self, rng):
        x = rng.normal(size=(200, 5))
        res = kmeans(x, 1, seed=0)
        np.testing.assert_allclose(res.centroids[0], x.mean(0), rtol=0, atol=1e-12)

    def test_k_equals_n_zero_objective(self, rng):
        x = rng.normal(size=(12, 3))
        res = kmeans(x, 12, seed=0)
        assert res.objective[-1] == 0.0
        assert sorted(map(tuple, res.centroids)) == sorted(map(tuple, x))

    def test_objective_non_increasing(self, rng):
        x = rng.normal(size=(3000, 6))
        res = kmeans(x, 40, iters=30, seed=1)
        assert len(res.objective) >= 2
        assert np.all(np.diff(res.objective) <= 1e-9 * res.objective[0])

    def test_deterministic(self, rng):
        x = rng.normal(size=(500, 4))
        a = kmeans(x, 8, seed=5)
        b = kmeans(x, 8, seed=5)
        np.testing.assert_array_equal(a.centroids, b.centroids)

    def test_duplicate_points_keep_k_centroids(self):
        # only 3 distinct points but k=5: empty clusters get re-seeded
        x = np.repeat(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), 10, axis=0)
        res = kmeans(x, 5, seed=0)
        assert res.centroids.shape == (5, 2)
        assert np.all(np.isfinite(res.centroids))
        assert res.objective[-1] == 0.0

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((3, 2)), 4)

    def test_sq_dists_matches_direct(self, rng):
        x = rng.normal(size=(30, 7))
        c = rng.normal(size=(9, 7))
        direct = ((x[:, None, :] - c[None]) ** 2).sum(-1)
        np.testing.assert_allclose(sq_dists(x, c), direct, rtol=1e-10, atol=1e-12)


@pytest.fixture(scope="module")
def cq():
    r = np.random.default_rng(0)
    return CoarseQuantizer(r.normal(size=(64, 8)).astype(np.float32))


class TestCoarseQuantizer:
    def test_query_at_centroid(self, cq):
        assert cq.find_nearest_lists(cq.centroids[5], 1).tolist() == [5]

    def test_full_permutation(self, cq, rng):
        out = cq.find_nearest_lists(rng.normal(size=8), cq.nlist)
        assert sorted(out.tolist()) == list(range(cq.nlist))

    def test_against_full_sort(self, cq, rng):
        q = rng.normal(size=8)
        d = ((cq.centroids.astype(np.float64) - q) ** 2).sum(1)
        expect = np.lexsort((np.arange(cq.nlist), d))[:10]
        np.testing.assert_array_equal(cq.find_nearest_lists(q, 10), expect)

    def test_ties_by_list_id(self):
        c = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [5.0, 5.0]])
        cq = CoarseQuantizer(c)
        assert cq.find_nearest_lists(np.zeros(2), 3).tolist() == [0, 1, 2]
        assert cq.search(np.zeros((2, 2)), 4).tolist() == [[0, 1, 2, 3]] * 2

    def test_inner_product_order(self):
        cq = CoarseQuantizer(np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 3.0]]), metric="ip")
        assert cq.find_nearest_lists(np.array([1.0, 0.1]), 3).tolist() == [1, 0, 2]

    def test_m_out_of_range(self, cq):
        with pytest.raises(ValueError):
            cq.find_nearest_lists(np.zeros(8), cq.nlist + 1)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            CoarseQuantizer(np.array([[np.nan]]))

    def test_train_needs_enough_points(self):
        with pytest.raises(ValueError):
            CoarseQuantizer.train(np.zeros((3, 2), np.float32), 4)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 20), st.integers(1, 20))
    def test_prefix_and_distinct(self, seed, m1, m2):
        r = np.random.default_rng(seed)
        # small integer grid so that distance ties are common
        cq = CoarseQuantizer(r.integers(-2, 3, size=(20, 3)).astype(np.float32))
        q = r.integers(-2, 3, size=3).astype(np.float32)
        a, b = sorted((m1, m2))
        short, long_ = cq.find_nearest_lists(q, a), cq.find_nearest_lists(q, b)
        np.testing.assert_array_equal(short, long_[:a])
        assert len(set(long_.tolist())) == b
