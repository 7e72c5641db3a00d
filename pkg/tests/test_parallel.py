import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optstop.dist import EnergyDistribution
from optstop.errors import ConfigError, EmptyRange, InvalidCost
from optstop.parallel import (
    HardwareCost,
    ParallelPlan,
    effective_unit_cost,
    embarrassing_transform,
    evaluate_plan,
    mixed_split,
    optimal_cores,
)
from optstop.stopping import CostModel, mean_stopping_step, solve_for_effort, solve_optimal_cost

from conftest import distributions, random_distribution


def gaussian_profile(n_atoms=2000, offset=100.0):
    x = np.arange(float(n_atoms))
    return EnergyDistribution.normalized(x + offset, np.exp(-0.5 * ((x - 0.75 * n_atoms) / (0.1 * n_atoms)) ** 2))


class TestTypes:
    def test_plan_validation(self):
        with pytest.raises(ConfigError):
            ParallelPlan(0)
        with pytest.raises(ConfigError):
            ParallelPlan(4, 5.0)
        with pytest.raises(ConfigError):
            ParallelPlan(4, 0.5)

    def test_cost_validation(self):
        with pytest.raises(InvalidCost):
            HardwareCost(0.0, 0.0)
        with pytest.raises(InvalidCost):
            HardwareCost(-1.0, 1.0)


class TestTransform:
    def test_examples(self, coin):
        assert embarrassing_transform(coin, 1) == coin
        assert np.allclose(embarrassing_transform(coin, 2).weights, [0.75, 0.25], atol=1e-15)
        d5 = EnergyDistribution.from_mapping({5: 1.0})
        assert embarrassing_transform(d5, 37) == d5

    @settings(max_examples=80, deadline=None)
    @given(distributions(), st.integers(1, 200))
    def test_cdf_identity(self, d, k):
        t = embarrassing_transform(d, k)
        x = np.concatenate((d.support - 0.05, d.support, d.support + 0.05))
        assert np.max(np.abs(t.cdf(x) - (1 - (1 - d.cdf(x)) ** k))) < 1e-12

    @settings(max_examples=80, deadline=None)
    @given(distributions(), st.integers(1, 20), st.integers(1, 20))
    def test_composition(self, d, a, b):
        once = embarrassing_transform(d, a * b)
        twice = embarrassing_transform(embarrassing_transform(d, a), b)
        assert np.array_equal(once.support, twice.support)
        assert np.allclose(once.weights, twice.weights, rtol=1e-12, atol=1e-15)

    def test_tiny_tail_keeps_relative_accuracy(self):
        d = EnergyDistribution.from_mapping({0.0: 1e-14, 1.0: 1.0 - 1e-14})
        w = embarrassing_transform(d, 100).weights[0]
        assert w == pytest.approx(-np.expm1(100 * np.log1p(-1e-14)), rel=1e-12)


class TestUnitCost:
    def test_examples(self):
        assert effective_unit_cost(HardwareCost(1.0, 0.0), ParallelPlan(100), "perfect") == pytest.approx(0.01)
        for n in (1, 7, 10**4):
            assert effective_unit_cost(HardwareCost(0.0, 2.0), ParallelPlan(n), "perfect") == 2.0
        hc = HardwareCost(1.5, 0.25)
        assert effective_unit_cost(hc, ParallelPlan(1), "none") == 1.75
        assert effective_unit_cost(hc, ParallelPlan(1), "perfect") == 1.75
        assert effective_unit_cost(hc, ParallelPlan(8, 4.0), "imperfect") == pytest.approx((1.5 + 2.0) / 4)
        assert effective_unit_cost(hc, ParallelPlan(8), "embarrassing") == pytest.approx(3.5)
        with pytest.raises(ConfigError):
            effective_unit_cost(hc, ParallelPlan(1), "magic")

    def test_imperfect_with_full_speedup_is_perfect(self):
        hc = HardwareCost(3.0, 0.5)
        # (c_t + c_cpu n) / n = c_t / n + c_cpu
        assert effective_unit_cost(hc, ParallelPlan(6, 6.0), "imperfect") == pytest.approx(3.0 / 6 + 0.5)


class TestEvaluate:
    def test_none_is_plain_solve(self, rng):
        for _ in range(20):
            d = random_distribution(rng, 20)
            hc = HardwareCost(float(rng.uniform(0.1, 2)), float(rng.uniform(0, 1)))
            ref = solve_optimal_cost(d, CostModel(hc.c_t + hc.c_cpu, 2.0))
            assert evaluate_plan(d, hc, ParallelPlan(1), 2.0, "none") == ref

    def test_embarrassing_beats_single_core(self, rng):
        # same per-round price: the best of 100 draws dominates one draw
        for _ in range(200):
            d = random_distribution(rng, 30)
            c = float(rng.exponential(1.0))
            single = evaluate_plan(d, HardwareCost(c, 0.0), ParallelPlan(1), 1.0, "none")
            emb = evaluate_plan(d, HardwareCost(c, 0.0), ParallelPlan(100), 1.0, "embarrassing")
            assert emb <= single + 1e-12

    def test_embarrassing_never_beats_perfect(self, rng):
        for _ in range(200):
            d = random_distribution(rng, 30)
            hc = HardwareCost(float(rng.exponential(1.0)), 0.0)
            n = int(rng.integers(1, 200))
            perf = evaluate_plan(d, hc, ParallelPlan(n), 1.0, "perfect")
            emb = evaluate_plan(d, hc, ParallelPlan(n), 1.0, "embarrassing")
            assert emb >= perf - 1e-9 * max(1.0, abs(perf))

    def test_regime_boundary(self):
        d = gaussian_profile()
        n = 100
        gaps, inside = [], []
        for c in np.geomspace(1e-4, 1e3, 43):
            hc = HardwareCost(float(c), 0.0)
            perf = evaluate_plan(d, hc, ParallelPlan(n), 1.0, "perfect")
            emb = evaluate_plan(d, hc, ParallelPlan(n), 1.0, "embarrassing")
            gap = (emb - perf) / abs(perf)
            gaps.append(gap)
            inside.append(mean_stopping_step(d, perf) >= n)
        gaps, inside = np.array(gaps), np.array(inside)
        assert inside[0] and not inside[-1]
        assert np.all(gaps[inside] < 0.05)
        beyond = gaps[np.argmin(inside):]
        assert np.all(np.diff(beyond) > 0)


class TestOptimalCores:
    def test_free_cores_use_all(self):
        d = gaussian_profile(200)
        assert optimal_cores(d, HardwareCost(1.0, 0.0), 1.0, range(1, 65)).n_cpu == 64

    def test_free_time_uses_one(self, rng):
        for _ in range(10):
            d = random_distribution(rng, 20)
            assert optimal_cores(d, HardwareCost(0.0, 0.3), 1.0, range(1, 40)).n_cpu == 1

    def test_against_independent_scan(self):
        d = EnergyDistribution.from_mapping({0: 0.01, 10: 0.99})
        hc = HardwareCost(1.0, 0.01)
        choice = optimal_cores(d, hc, 1.0, range(1, 201))
        costs = []
        for n in range(1, 201):
            w0 = 1 - 0.99**n
            costs.append(solve_for_effort(EnergyDistribution.from_mapping({0: w0, 10: 1 - w0}), 1.0 + 0.01 * n))
        best = int(np.argmin(costs))
        assert choice.n_cpu == best + 1
        assert choice.optimal_cost == pytest.approx(costs[best], rel=1e-12)

    def test_empty(self, coin):
        with pytest.raises(EmptyRange):
            optimal_cores(coin, HardwareCost(1, 1), 1.0, [])

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_saturation(self, seed):
        rng = np.random.default_rng(seed)
        d = random_distribution(rng, 40)
        hc = HardwareCost(float(rng.uniform(0.5, 5.0)), float(rng.uniform(0.01, 0.5)))
        limit = solve_for_effort(d, hc.c_cpu)
        choice = optimal_cores(d, hc, 1.0, range(1, 10**4 + 1), mode="perfect")
        assert abs(choice.optimal_cost - limit) / abs(limit) < 0.01


class TestMixedSplit:
    def test_sorted_and_complete(self):
        d = gaussian_profile(300)
        hc = HardwareCost(1.0, 0.001)
        out = mixed_split(d, hc, 1.0, 16, lambda k: k ** 0.8)
        assert sorted(r.width for r in out) == list(range(1, 17))
        costs = [r.optimal_cost for r in out]
        assert costs == sorted(costs)

    def test_linear_speedup_prefers_single_copy(self):
        # with perfect speedup one copy using every core is never worse
        d = gaussian_profile(300)
        out = mixed_split(d, HardwareCost(1.0, 0.0), 1.0, 8, lambda k: float(k))
        assert out[0].width == 1

    def test_bad_speedup(self, coin):
        with pytest.raises(ConfigError):
            mixed_split(coin, HardwareCost(1.0, 0.0), 1.0, 4, lambda k: 2.0 * k)
