import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rairs.assignment import (SingularResidual, StrategyConfig, air_true_rank, assign,
                              assign_multi, assign_pairs, loss_air, loss_naive, loss_soar,
                              multi_assign, rair_assign)
from rairs.coarse import CoarseQuantizer
from rairs.dataset import generate_synthetic


def _random_cq(seed, nlist=24, dim=6):
    r = np.random.default_rng(seed)
    return CoarseQuantizer(r.normal(size=(nlist, dim)).astype(np.float32)), r


def _sorted_lists(cq, v):
    d = ((cq.centroids.astype(np.float64) - v.astype(np.float64)) ** 2).sum(1)
    return np.lexsort((np.arange(cq.nlist), d))


class TestLosses:
    def test_naive(self):
        assert loss_naive(np.zeros(3)) == 0.0
        assert loss_naive([3.0, 4.0]) == 25.0

    def test_soar_orthogonal(self):
        assert loss_soar([1.0, 0.0], [0.0, 2.0], 0.7) == 4.0

    def test_soar_parallel(self):
        r = np.array([1.0, 2.0, 2.0])
        assert loss_soar(r, 2 * r, 1.0) == pytest.approx(2 * loss_naive(2 * r))

    def test_soar_by_angle(self, rng):
        r, rp = rng.normal(size=5), rng.normal(size=5)
        cos = r @ rp / (np.linalg.norm(r) * np.linalg.norm(rp))
        # penalty is lam * (|r'| cos)^2
        expect = (rp @ rp) * (1 + 0.5 * cos ** 2)
        assert loss_soar(r, rp, 0.5) == pytest.approx(expect, rel=1e-12)

    def test_soar_singular(self):
        with pytest.raises(SingularResidual):
            loss_soar(np.zeros(2), [1.0, 0.0], 0.5)

    def test_air_hand_values(self):
        r = np.array([1.0, -2.0, 0.5])
        assert loss_air(r, -r, 0.5) == pytest.approx(0.5 * (r @ r))
        assert loss_air(r, [3.0, 4.0, 0.0], 0.0) == loss_naive([3.0, 4.0, 0.0])

    def test_air_min_is_antiparallel(self):
        r = np.array([1.0, 0.0])
        thetas = np.linspace(0, 2 * math.pi, 721)
        losses = [loss_air(r, 0.8 * np.array([math.cos(t), math.sin(t)]), 0.5) for t in thetas]
        assert thetas[int(np.argmin(losses))] == pytest.approx(math.pi)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=4, max_size=4),
           st.lists(st.floats(-5, 5), min_size=4, max_size=4))
    def test_air_zero_lambda_is_naive(self, r, rp):
        assert loss_air(r, rp, 0.0) == loss_naive(rp)


class TestStrategyConfig:
    def test_defaults(self):
        cfg = StrategyConfig()
        assert (cfg.lam, cfg.n_cands, cfg.m) == (0.5, 10, 2)

    @pytest.mark.parametrize("kw", [dict(lam=-1.0), dict(kind="bogus"), dict(aggr="median"),
                                    dict(m=3), dict(m=3, strict=True, n_cands=2),
                                    dict(kind="soar", m=3, strict=True)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            StrategyConfig(**kw)

    def test_presets(self):
        assert StrategyConfig.from_name("air-strict").strict
        assert not StrategyConfig.from_name("air").strict
        assert StrategyConfig.from_name("air-m").m == 3
        assert StrategyConfig.from_name("single").multiplicity == 1
        with pytest.raises(ValueError):
            StrategyConfig.from_name("nope")


class TestRairAssign:
    def test_vector_at_centroid_non_strict(self):
        cq, _ = _random_cq(0)
        a = rair_assign(cq, cq.centroids[7], StrategyConfig(lam=0.5))
        assert (a.list1, a.list2) == (7, 7)

    def test_soar_at_centroid_falls_back(self):
        cq, _ = _random_cq(1)
        v = cq.centroids[3]
        a = rair_assign(cq, v, StrategyConfig.from_name("soarl2"))
        second = _sorted_lists(cq, v)[1]
        assert (a.list1, a.list2) == tuple(sorted((3, int(second))))

    def test_zero_lambda_strict_is_second_nearest(self):
        cq, r = _random_cq(2)
        for _ in range(50):
            v = r.normal(size=6).astype(np.float32)
            a = rair_assign(cq, v, StrategyConfig(lam=0.0, strict=True))
            first, second = _sorted_lists(cq, v)[:2]
            assert (a.list1, a.list2) == tuple(sorted((int(first), int(second))))

    @pytest.mark.parametrize("strict", [False, True])
    def test_exhaustive_oracle(self, strict):
        cq, r = _random_cq(3)
        cfg = StrategyConfig(lam=0.5, n_cands=cq.nlist, strict=strict)
        c64 = cq.centroids.astype(np.float64)
        for _ in range(60):
            v = r.normal(size=6).astype(np.float32)
            order = _sorted_lists(cq, v)
            x = v.astype(np.float64)
            r0 = c64[order[0]] - x
            best, best_loss = None, np.inf
            for lst in order[1 if strict else 0:]:
                loss = loss_air(r0, c64[lst] - x, 0.5)
                if loss < best_loss - 1e-12:
                    best, best_loss = int(lst), loss
            a = rair_assign(cq, v, cfg)
            assert (a.list1, a.list2) == tuple(sorted((int(order[0]), best)))

    def test_soar_exhaustive_oracle(self):
        cq, r = _random_cq(4)
        cfg = StrategyConfig(kind="soar", lam=1.0, n_cands=cq.nlist, strict=True)
        c64 = cq.centroids.astype(np.float64)
        for _ in range(40):
            v = r.normal(size=6).astype(np.float32)
            order = _sorted_lists(cq, v)
            x = v.astype(np.float64)
            r0 = c64[order[0]] - x
            losses = [loss_soar(r0, c64[l] - x, 1.0) for l in order[1:]]
            second = int(order[1 + int(np.argmin(losses))])
            a = rair_assign(cq, v, cfg)
            assert (a.list1, a.list2) == tuple(sorted((int(order[0]), second)))

    def test_invariants(self):
        cq, r = _random_cq(5)
        x = r.normal(size=(500, 6)).astype(np.float32)
        c64 = cq.centroids.astype(np.float64)
        nearest = cq.search(x, 1)[:, 0]
        lam = 0.5
        pairs = assign_pairs(cq, x, StrategyConfig(lam=lam))
        for v, (a, b), n in zip(x.astype(np.float64), pairs, nearest):
            second = b if a == n else a
            r0, r1 = c64[n] - v, c64[second] - v
            assert loss_air(r0, r1, lam) <= (1 + lam) * (r0 @ r0) + 1e-9
        strict = assign_pairs(cq, x, StrategyConfig(lam=lam, strict=True))
        assert np.all(strict[:, 0] < strict[:, 1])
        assert np.all(pairs[:, 0] <= pairs[:, 1])

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([0.25, 2.0, 4.0]))
    def test_scale_invariance(self, seed, scale):
        cq, r = _random_cq(seed % 1000, nlist=16, dim=4)
        x = r.normal(size=(100, 4)).astype(np.float32)
        # powers of two scale all losses exactly
        scaled = CoarseQuantizer(cq.centroids * np.float32(scale))
        for name in ("air", "air-strict", "soarl2", "naive"):
            cfg = StrategyConfig.from_name(name)
            np.testing.assert_array_equal(assign_pairs(cq, x, cfg),
                                          assign_pairs(scaled, x * np.float32(scale), cfg))

    def test_candidate_window_matches_exact_optimum(self):
        vs = generate_synthetic(5000, 16, 32, seed=4, spread=0.1)
        cq = CoarseQuantizer.train(vs, 64, seed=0)
        for strict in (False, True):
            ranks = air_true_rank(cq, vs.data, 0.5, strict=strict)
            assert np.mean(ranks < 10) >= 0.99

    def test_n_cands_exceeds_nlist(self):
        cq, _ = _random_cq(6, nlist=4)
        with pytest.raises(ValueError):
            assign_pairs(cq, np.zeros((1, 6), np.float32), StrategyConfig())

    def test_single(self):
        cq, r = _random_cq(7)
        x = r.normal(size=(30, 6)).astype(np.float32)
        out = assign(cq, x, StrategyConfig(kind="single"))
        assert out.shape == (30, 1)
        np.testing.assert_array_equal(out[:, 0], cq.search(x, 1)[:, 0])

    def test_inner_product_quantizer(self):
        cq, r = _random_cq(8)
        cq = CoarseQuantizer(cq.centroids, metric="ip")
        x = r.normal(size=(50, 6)).astype(np.float32)
        pairs = assign_pairs(cq, x, StrategyConfig.from_name("soar-ip"))
        assert np.all(pairs[:, 0] < pairs[:, 1])
        top = cq.search(x, 1)[:, 0]
        assert np.all((pairs[:, 0] == top) | (pairs[:, 1] == top))


def _greedy_oracle(cq, v, m, lam, aggr, n_cands):
    c64 = cq.centroids.astype(np.float64)
    x = v.astype(np.float64)
    cands = _sorted_lists(cq, v)[:n_cands]
    chosen = [int(cands[0])]
    fn = {"max": max, "min": min, "avg": lambda s: sum(s) / len(s)}[aggr]
    while len(chosen) < m:
        best, best_loss = None, np.inf
        for c in cands:
            if int(c) in chosen:
                continue
            rp = c64[c] - x
            agg = fn([(c64[p] - x) @ rp for p in chosen])
            loss = rp @ rp + lam * agg
            if loss < best_loss - 1e-12:
                best, best_loss = int(c), loss
        chosen.append(best)
    return sorted(chosen)


class TestMultiAssign:
    @pytest.mark.parametrize("aggr", ["max", "min", "avg"])
    def test_exhaustive_greedy_oracle(self, aggr):
        cq, r = _random_cq(9)
        cfg = StrategyConfig(kind="air", strict=True, m=3, n_cands=cq.nlist, aggr=aggr)
        for _ in range(40):
            v = r.normal(size=6).astype(np.float32)
            assert multi_assign(cq, v, cfg) == _greedy_oracle(cq, v, 3, 0.5, aggr, cq.nlist)

    def test_m2_equals_strict_rair(self):
        cq, r = _random_cq(10)
        x = r.normal(size=(300, 6)).astype(np.float32)
        cfg = StrategyConfig(strict=True)
        np.testing.assert_array_equal(assign_multi(cq, x, cfg), assign_pairs(cq, x, cfg))

    def test_aggregates_agree_with_one_prior(self):
        cq, r = _random_cq(11)
        x = r.normal(size=(200, 6)).astype(np.float32)
        outs = [assign_multi(cq, x, StrategyConfig(strict=True, aggr=a))
                for a in ("max", "min", "avg")]
        np.testing.assert_array_equal(outs[0], outs[1])
        np.testing.assert_array_equal(outs[0], outs[2])

    def test_distinct_sorted(self):
        cq, r = _random_cq(12)
        x = r.normal(size=(200, 6)).astype(np.float32)
        out = assign_multi(cq, x, StrategyConfig(strict=True, m=4))
        assert np.all(np.diff(out, axis=1) > 0)

    def test_requires_strict_air(self):
        cq, _ = _random_cq(13)
        with pytest.raises(ValueError):
            assign_multi(cq, np.zeros((1, 6), np.float32), StrategyConfig(strict=False))
