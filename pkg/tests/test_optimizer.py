import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdscache.demand import zipf
from mdscache.evaluation import mds_objective, rate_mds
from mdscache.optimizer import (
    breakpoints,
    brute_force_oracle,
    exhaustive_oracle,
    kkt_threshold,
    lipschitz,
    optimize,
    segments,
)
from mdscache.placement import most_popular, proportional, uniform
from mdscache.topology import CoverageProfile


def covered(*g):
    return CoverageProfile.from_covered(g)


def objective(gamma, p, q):
    return mds_objective(gamma.gamma, np.asarray(p, float), np.asarray(q, float))


def random_instance(rng, n_files, s_max):
    g = rng.dirichlet(np.ones(s_max))
    g[rng.random(s_max) < 0.2] = 0
    if g.sum() == 0:
        g[-1] = 1
    g = g / g.sum()
    gamma = CoverageProfile.from_gamma(np.concatenate([[0.0], g]))
    p = rng.dirichlet(np.ones(n_files))
    return gamma, p


def test_double_coverage_splits_cache():
    gamma, p = covered(0, 1), [0.6, 0.4]
    pl = optimize(gamma, p, 1)
    assert np.allclose(pl.q, [0.5, 0.5])
    assert objective(gamma, p, pl.q) == pytest.approx(0, abs=1e-15)
    oracle = brute_force_oracle(gamma, p, 1, 1e-3)
    assert objective(gamma, p, oracle.q) == pytest.approx(0, abs=1e-12)


def test_single_coverage_fills_most_popular():
    gamma, p = covered(1), [0.8, 0.2]
    pl = optimize(gamma, p, 1)
    assert pl.q.tolist() == [1, 0]
    assert objective(gamma, p, pl.q) == pytest.approx(0.2)
    oracle = brute_force_oracle(gamma, p, 1, 1e-3)
    assert objective(gamma, p, oracle.q) == pytest.approx(0.2)


def test_full_cache():
    pop = zipf(7, 0.9)
    pl = optimize(covered(0.2, 0.5, 0.3), pop, 7)
    assert np.allclose(pl.q, 1)
    assert rate_mds(covered(0.2, 0.5, 0.3), pop, pl).rate == pytest.approx(0, abs=1e-12)


def test_budget_errors():
    with pytest.raises(ValueError):
        optimize(covered(1), [0.5, 0.5], 3)
    with pytest.raises(ValueError):
        optimize(covered(1), [0.5, 0.5], -1)


def test_oracle_forced_by_budget():
    assert brute_force_oracle(covered(1), [1.0], 0.5, 0.01).q.tolist() == [0.5]


def test_oracle_matches_optimizer_on_small_example():
    gamma, p = covered(0.5, 0.5), [0.7, 0.3]
    opt = objective(gamma, p, optimize(gamma, p, 1).q)
    orc = objective(gamma, p, brute_force_oracle(gamma, p, 1, 1e-3).q)
    L = lipschitz(gamma, p)
    assert opt <= orc + L * 1e-3
    assert abs(opt - orc) <= L * 1e-3


def test_oracle_guards():
    with pytest.raises(ValueError):
        brute_force_oracle(covered(1), np.full(5, 0.2), 1, 0.1)
    with pytest.raises(ValueError):
        brute_force_oracle(covered(1), [0.5, 0.5], 0.55, 0.1)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3), s=st.integers(1, 4),
       steps=st.integers(0, 60))
def test_dynamic_program_equals_literal_enumeration(seed, n, s, steps):
    rng = np.random.default_rng(seed)
    gamma, p = random_instance(rng, n, s)
    M = min(steps, 20 * n) / 20
    dp = brute_force_oracle(gamma, p, M, 0.05)
    ex = exhaustive_oracle(gamma, p, M, 0.05)
    assert objective(gamma, p, dp.q) == pytest.approx(objective(gamma, p, ex.q), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4), s=st.integers(1, 4),
       frac=st.floats(0, 1))
def test_greedy_beats_every_grid_point(seed, n, s, frac):
    rng = np.random.default_rng(seed)
    gamma, p = random_instance(rng, n, s)
    delta = 0.01
    M = round(frac * n / delta) * delta
    pl = optimize(gamma, p, M)
    orc = brute_force_oracle(gamma, p, M, delta)
    f_opt, f_orc = objective(gamma, p, pl.q), objective(gamma, p, orc.q)
    assert f_opt <= f_orc + 1e-12
    # rounding the continuous optimum down onto the grid loses at most sum_j L_j delta
    assert f_orc - f_opt <= n * lipschitz(gamma, p) * delta + 1e-12
    assert kkt_threshold(gamma, p, pl) is not None


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 300), s=st.integers(1, 6),
       alpha=st.floats(0, 2), frac=st.floats(0, 1))
def test_feasibility_and_dominance(seed, n, s, alpha, frac):
    rng = np.random.default_rng(seed)
    gamma, _ = random_instance(rng, 1, s)
    pop = zipf(n, alpha)
    M = int(frac * n)
    pl = optimize(gamma, pop, M)
    assert abs(pl.q.sum() - M) <= 1e-9
    assert np.all((pl.q >= 0) & (pl.q <= 1))
    r = rate_mds(gamma, pop, pl).rate
    for other in (most_popular(pop, M), uniform(n, M), proportional(pop, M)):
        assert r <= rate_mds(gamma, pop, other).rate + 1e-9


def test_rate_non_increasing_in_budget(rng):
    for _ in range(20):
        gamma, p = random_instance(rng, 30, 5)
        rates = [objective(gamma, p, optimize(gamma, p, M).q) for M in np.linspace(0, 30, 61)]
        assert all(a >= b - 1e-12 for a, b in zip(rates, rates[1:]))


def test_segments_partition_and_convexity(rng):
    for s in range(1, 7):
        gamma, p = random_instance(rng, 5, s)
        segs = segments(gamma, p)
        bp = breakpoints(gamma.s_max)
        for j in range(5):
            mine = [g for g in segs if g.file == j]
            assert [g.q_low for g in mine] == bp[:-1].tolist()
            assert [g.q_high for g in mine] == bp[1:].tolist()
            slopes = [g.slope for g in mine]
            assert all(a >= b for a, b in zip(slopes, slopes[1:]))


def test_segment_slopes_are_finite_differences(rng):
    gamma, p = random_instance(rng, 3, 4)
    for seg in segments(gamma, p):
        h = 1e-7
        mid = (seg.q_low + seg.q_high) / 2
        q1, q2 = np.zeros(3), np.zeros(3)
        q1[seg.file], q2[seg.file] = mid - h, mid + h
        fd = (objective(gamma, p, q1) - objective(gamma, p, q2)) / (2 * h)
        assert fd == pytest.approx(seg.slope, abs=1e-6)


def test_kkt_detects_suboptimal_placement():
    gamma = covered(0.3, 0.7)
    pop = zipf(10, 1.0)
    assert kkt_threshold(gamma, pop, optimize(gamma, pop, 3)) is not None
    assert kkt_threshold(gamma, pop, uniform(10, 3)) is None


def test_zero_popularity_files_filled_last():
    gamma = covered(1)
    pl = optimize(gamma, [0.7, 0.0, 0.3], 2.5)
    assert np.allclose(pl.q, [1, 0.5, 1])
