"""Exit criteria. Run alone with ``pytest -m acceptance`` for the summary table."""

import time
from itertools import combinations

import numpy as np
import pytest

from mdscache import galois_mds
from mdscache.cli import ExperimentConfig, GammaCache, check_invariants, figure_config, run_sweep
from mdscache.demand import zipf
from mdscache.evaluation import rate_mds, rate_uncoded, simulate, simulate_coded_end_to_end
from mdscache.optimizer import brute_force_oracle, kkt_threshold, lipschitz, optimize
from mdscache.placement import most_popular, proportional, uniform
from mdscache.topology import CoverageProfile, Deployment, GridTopology, deploy, estimate_gamma

pytestmark = pytest.mark.acceptance

GAMMA_SAMPLES = 1_000_000


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


@pytest.fixture(scope="module")
def cache():
    return GammaCache()


def test_c1_deployment_calibration():
    with Timer() as t:
        n_sbs = len(deploy(GridTopology(grid_spacing=60, macro_radius=500, coverage_radius=60)))
    assert n_sbs == 316
    assert t.elapsed < 1.0


def test_c2_coding_dominance():
    rng = np.random.default_rng(2)
    with Timer() as t:
        violations = 0
        for _ in range(1000):
            n = int(rng.integers(1, 60))
            s = int(rng.integers(1, 12))
            g = CoverageProfile.from_gamma(rng.dirichlet(np.ones(s + 1)))
            p = rng.dirichlet(np.ones(n))
            q = rng.random(n)
            if rate_mds(g, p, q).rate > rate_uncoded(g, p, q).rate + 1e-12:
                violations += 1
            q01 = rng.integers(0, 2, n).astype(float)
            assert abs(rate_mds(g, p, q01).rate - rate_uncoded(g, p, q01).rate) <= 1e-12
    assert violations == 0
    assert t.elapsed < 5.0


def test_c3_optimizer_exactness():
    rng = np.random.default_rng(2024)
    delta = 1e-3
    with Timer() as t:
        for _ in range(200):
            N = int(rng.integers(2, 5))
            S = int(rng.integers(1, 5))
            gamma = CoverageProfile.from_gamma(np.concatenate([[0.0], rng.dirichlet(np.ones(S))]))
            p = np.sort(rng.dirichlet(np.ones(N)))[::-1]
            M = int(rng.integers(0, N * 1000 + 1)) * delta
            placement = optimize(gamma, p, M)
            oracle = brute_force_oracle(gamma, p, M, delta)
            f_opt = rate_mds(gamma, p, placement).rate
            f_orc = rate_mds(gamma, p, oracle).rate
            L = lipschitz(gamma, p)
            assert f_opt <= f_orc + L * delta
            assert abs(f_opt - f_orc) <= L * delta
            assert kkt_threshold(gamma, p, placement) is not None
    assert t.elapsed < 60.0


def test_c4_analytic_simulation_agreement():
    n = 100
    with Timer() as t:
        gamma = estimate_gamma(GridTopology(60, 500, 60), GAMMA_SAMPLES, seed=1)
        pop = zipf(200, 0.7)
        M = 20
        placements = [optimize(gamma, pop, M), most_popular(pop, M), uniform(200, M),
                      proportional(pop, M)]
        for pl in placements:
            for scheme, exact in (("mds", rate_mds), ("uncoded", rate_uncoded)):
                sim = simulate(gamma, pop, pl, scheme, n, 1_000_000, seed=17)
                target = exact(gamma, pop, pl).rate
                assert abs(sim.rate - target) <= 4 * sim.std_err + gamma.s_max / n, (
                    pl.label, scheme, sim.rate, target)
    assert t.elapsed < 120.0


def test_c5_end_to_end_coded_correctness():
    rng = np.random.default_rng(5)
    with Timer() as t:
        for _ in range(5):
            k = int(rng.integers(1, 5))
            dep = Deployment(rng.uniform(-100, 100, (k, 2)), float(rng.uniform(50, 150)), 100.0)
            N = int(rng.integers(1, 6))
            n = int(rng.integers(1, 9))
            pop = zipf(N, float(rng.uniform(0.3, 1.5)))
            M = float(rng.uniform(0.2, N))
            gamma = estimate_gamma(dep, 50_000, seed=0)
            pl = optimize(gamma, pop, M)
            seed = int(rng.integers(1 << 30))
            coded, ok = simulate_coded_end_to_end(dep, pop, pl, n, 10_000, seed)
            counting = simulate(dep, pop, pl, "mds", n, 10_000, seed)
            assert ok
            assert coded.rate == counting.rate
    assert t.elapsed < 30.0


@pytest.fixture(scope="module")
def figure_rows(cache):
    def rows(figure):
        return run_sweep(figure_config(figure, gamma_samples=GAMMA_SAMPLES, seed=3), cache)

    return {f: rows(f) for f in (3, 4, 5)}


def curves(rows):
    out = {}
    for r in rows:
        if r["samples"] == 0:
            out.setdefault((r["strategy"], r["coding"]), []).append((r["value"], r["rate"]))
    return {k: np.array([v for _, v in sorted(pts)]) for k, pts in out.items()}


def test_c6_figure_shapes(figure_rows):
    fig3 = curves(figure_rows[3])
    assert len(fig3) == 8
    # (a) every curve falls with the cache size
    for key, rates in fig3.items():
        assert np.all(np.diff(rates) <= 1e-12), key

    # (b) most-popular ignores the radius, everything else gains from overlap
    fig4 = curves(figure_rows[4])
    pop = fig4[("pop", "mds")]
    assert np.ptp(pop) <= 1e-12
    for s in ("opt", "unif", "prop"):
        assert np.all(np.diff(fig4[(s, "mds")]) < 0), s

    for f in (3, 4, 5):
        table = curves(figure_rows[f])
        best = table[("opt", "mds")]
        for key, rates in table.items():
            # (c) optimum below every other curve
            assert np.all(best <= rates + 1e-9), (f, key)
        for s in ("opt", "pop", "unif", "prop"):
            # (d) coding never hurts
            assert np.all(table[(s, "mds")] <= table[(s, "uncoded")] + 1e-12), (f, s)
        assert check_invariants(figure_rows[f]) == []


def test_c7_prop_opt_gap(cache):
    cfg = ExperimentConfig(strategies=["opt", "prop"], codings=["mds"],
                           gamma_samples=GAMMA_SAMPLES, seed=3)
    rates = {r["strategy"]: r["rate"] for r in run_sweep(cfg, cache)}
    gap = rates["prop"] - rates["opt"]
    print(f"prop - opt MDS gap at the default point: {gap:.4f}")
    assert abs(gap - 0.07) <= 0.03


def test_c8_codec_exhaustive():
    rng = np.random.default_rng(8)
    with Timer() as t:
        for E in range(1, 13):
            for n in range(1, E + 1):
                params = galois_mds.CodeParams(n, E)
                frags = [rng.integers(0, 256, 8, dtype=np.uint8).tobytes() for _ in range(n)]
                packets = galois_mds.encode(params, frags)
                for subset in combinations(packets, n):
                    assert galois_mds.decode(params, list(subset)) == frags
    assert t.elapsed < 10.0
