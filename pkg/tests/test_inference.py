import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from sproc.inference import (ConfidenceBand, anderson_darling, anderson_darling_pvalue, band_binomial,
                             band_monte_carlo, berman_tests, cdf_tests, envelope, ks_distance,
                             resolve_threads, run_replicates, wilcoxon_auc)
from sproc.models import FitError, fit_poisson_loglinear, simulate_poisson
from sproc.roc import RocCurve, auc, roc_casecontrol, roc_covariate_pp, youden
from sproc.spatial import Grid, PointPattern, Raster, Window, spatial_cdf


def _pattern(seed, n=60, ncell=12, levels=None):
    rng = np.random.default_rng(seed)
    g = Grid.covering(0, 1, 0, 1, ncell)
    z = rng.normal(size=g.shape) if levels is None else rng.integers(0, levels, g.shape).astype(float)
    W = Window.unit_square()
    return PointPattern(rng.random(n), rng.random(n), W), Raster(g, z), W


class TestBerman:
    @given(st.integers(0, 10_000), st.sampled_from([None, 3]))
    def test_v2_auc_identity(self, seed, levels):
        pp, Z, W = _pattern(seed, levels=levels)
        n = pp.n
        V2 = berman_tests(pp, Z, W)["z2"].statistic
        assert V2 == pytest.approx(np.sqrt(12 * n) * (auc(roc_covariate_pp(pp, Z)) - 0.5), abs=1e-12)

    def test_z1_direct_formula(self):
        pp, Z, W = _pattern(1)
        z = Z.lookup(pp.x, pp.y)
        a = Z.grid.cell_area
        lam = pp.n / W.area()
        T = (z.sum() - lam * a * Z.values.sum()) / np.sqrt(lam * a * np.sum(Z.values ** 2))
        assert berman_tests(pp, Z, W)["z1"].statistic == pytest.approx(T, rel=1e-12)

    def test_z1_calibration(self):
        g = Grid.covering(0, 1, 0, 1, 50)
        Z = Raster(g, np.random.default_rng(5).random(g.shape))
        W = Window.unit_square()
        from sproc.synthetic import csr_pattern
        plug, cond = [], []
        for k in range(400):
            pp = csr_pattern(W, 100, seed=k)
            plug.append(berman_tests(pp, Z, W)["z1"].statistic)
            cond.append(berman_tests(pp, Z, W, conditional=True)["z1"].statistic)
        # given n the plug-in variance overstates var(S) by E[Z^2] / var(Z) = 4 here
        assert np.std(plug) == pytest.approx(0.5, abs=0.05)
        assert np.std(cond) == pytest.approx(1.0, abs=0.1)

    def test_constant_covariate(self, unit_window, grid20):
        pp = PointPattern([0.5], [0.5], unit_window)
        with pytest.raises(ValueError):
            berman_tests(pp, Raster(grid20, np.ones(grid20.shape)))

    def test_pvalues_in_range(self):
        pp, Z, W = _pattern(4)
        for r in list(berman_tests(pp, Z, W).values()) + list(cdf_tests(pp, Z, W).values()):
            assert 0 <= r.p_value <= 1
            json.dumps(r.as_dict())


class TestCdfTests:
    @given(st.integers(0, 10_000), st.sampled_from([None, 4]))
    def test_ks_equals_youden(self, seed, levels):
        pp, Z, W = _pattern(seed, levels=levels)
        c = roc_covariate_pp(pp, Z)
        D, Dp, _ = ks_distance(Z.lookup(pp.x, pp.y), spatial_cdf(Z, W))
        assert D == pytest.approx(youden(c, one_sided=False), abs=1e-12)
        assert Dp == pytest.approx(youden(c, one_sided=True), abs=1e-12)

    def test_ks_against_scipy_continuous(self, rng):
        from sproc.spatial import StepCdf
        # a fine uniform step cdf approximates the continuous uniform
        m = 200_000
        F0 = StepCdf((np.arange(m) + 0.5) / m, np.arange(1, m + 1) / m)
        z = rng.random(30)
        D, _, _ = ks_distance(z, F0)
        assert D == pytest.approx(stats.kstest(z, "uniform").statistic, abs=2e-5)

    @given(st.sampled_from(["exp", "cube"]))
    def test_monotone_invariance(self, h):
        pp, Z, W = _pattern(7)
        f = {"exp": np.exp, "cube": lambda v: v ** 3}[h]
        a, b = cdf_tests(pp, Z, W), cdf_tests(pp, Z.map(f), W)
        for k in a:
            assert a[k].statistic == pytest.approx(b[k].statistic, abs=1e-12)
        assert berman_tests(pp, Z, W)["z2"].statistic == pytest.approx(
            berman_tests(pp, Z.map(f), W)["z2"].statistic, abs=1e-12)

    def test_anderson_darling_against_scipy(self, rng):
        u = rng.random(50)
        A2 = anderson_darling(u)
        i = np.arange(1, 51)
        us = np.sort(u)
        oracle = -50 - np.mean((2 * i - 1) * (np.log(us) + np.log(1 - us[::-1])))
        assert A2 == pytest.approx(oracle, rel=1e-12)

    # asymptotic critical values of the case with fully specified null
    @pytest.mark.parametrize("a2,p", [(1.933, 0.10), (2.492, 0.05), (3.070, 0.025), (3.857, 0.01)])
    def test_anderson_darling_pvalues(self, a2, p):
        assert anderson_darling_pvalue(a2) == pytest.approx(p, abs=2e-3)

    def test_pvalue_monotone(self):
        vals = [anderson_darling_pvalue(a) for a in np.linspace(0.1, 6, 60)]
        assert np.all(np.diff(vals) <= 0)


class TestWilcoxon:
    def test_identical_groups(self):
        r = wilcoxon_auc([1, 2, 3], [1, 2, 3])
        assert r["auc"] == 0.5

    def test_against_scipy(self, rng):
        x = rng.integers(0, 6, 40).astype(float)
        y = rng.integers(0, 5, 35).astype(float)
        r = wilcoxon_auc(x, y, "greater")
        ref = stats.mannwhitneyu(x, y, alternative="greater", use_continuity=False, method="asymptotic")
        assert r["test"].statistic == pytest.approx(ref.statistic)
        assert r["test"].p_value == pytest.approx(ref.pvalue, rel=1e-10)

    @given(st.integers(0, 10_000))
    def test_matches_casecontrol_auc(self, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.integers(0, 8, 15), rng.integers(0, 8, 12)
        c = roc_casecontrol(np.concatenate([x, y]), labels=np.r_[np.ones(15), np.zeros(12)])
        assert wilcoxon_auc(x, y)["auc"] == pytest.approx(auc(c), abs=1e-12)

    def test_empty_group(self):
        with pytest.raises(ValueError):
            wilcoxon_auc([], [1.0])


class TestBinomialBand:
    def test_zero_width_at_extremes(self):
        b = band_binomial(RocCurve([0, 0.5, 1], [0, 0.5, 1]), 25, p=[0.0, 1.0])
        assert np.all(b.width() == 0)

    def test_width_at_half(self):
        n = 64
        b = band_binomial(RocCurve([0, 1], [0, 1]), n, p=[0.5])
        assert b.width()[0] == pytest.approx(2 * stats.norm.ppf(0.975) * np.sqrt(0.25 / n))

    def test_truncated(self):
        b = band_binomial(RocCurve([0, 0.01, 1], [0, 0.99, 1]), 3)
        assert np.all(b.lower >= 0) and np.all(b.upper <= 1)


class TestReplicates:
    def test_seeded_and_thread_independent(self):
        fn = lambda k, rng: rng.random()
        a = run_replicates(fn, 8, seed=5, threads=1)
        b = run_replicates(fn, 8, seed=5, threads=3)
        assert a == b and len(set(a)) == 8

    def test_env_threads(self, monkeypatch):
        monkeypatch.setenv("SPROC_THREADS", "4")
        assert resolve_threads(None) == 4

    def test_failures_reported(self, rng, unit_window, zx20):
        pp = PointPattern(rng.random(30), rng.random(30), unit_window)
        m = fit_poisson_loglinear(pp, [zx20])
        tiny = type(m)(m.coefficients, m.se, m.names, zx20.map(lambda v: 0.0 * v), True, 1, 1e-8,
                       X=m.X, counts=m.counts, areas=m.areas, cells=m.cells, point_cell=m.point_cell,
                       covariates=m.covariates, data=pp)
        with pytest.raises(FitError):
            band_monte_carlo(tiny, pp, nsim=5, seed=1)


class TestMonteCarloAndEnvelope:
    @pytest.fixture
    def fitted(self, unit_window):
        g = Grid.covering(0, 1, 0, 1, 25)
        Z = Raster.from_function(g, lambda x, y: x)
        pp = simulate_poisson(Z.map(lambda v: 150 * np.exp(1.5 * v)), unit_window, seed=11)
        return pp, Z, fit_poisson_loglinear(pp, [Z])

    def test_reproducible(self, fitted):
        pp, Z, m = fitted
        a = band_monte_carlo(m, pp, nsim=10, seed=3, covariate=Z)
        b = band_monte_carlo(m, pp, nsim=10, seed=3, covariate=Z)
        assert np.array_equal(a.lower, b.lower)

    def test_agrees_with_binomial_width(self, fitted):
        pp, Z, m = fitted
        p = np.linspace(0.05, 0.95, 19)
        mc = band_monte_carlo(m, pp, nsim=100, seed=2, covariate=Z, p=p)
        bb = band_binomial(roc_covariate_pp(pp, Z), pp.n, p=p)
        assert abs(mc.width().mean() / bb.width().mean() - 1) < 0.2

    def test_envelope_two_sims_is_min_max(self, fitted):
        pp, Z, m = fitted
        p = np.linspace(0, 1, 11)
        env = envelope(m, Z, pp.window, nsim=2, seed=4, p=p)
        from sproc.inference import run_replicates as rr
        from sproc.roc import evaluate
        curves = rr(lambda k, rng: np.asarray(evaluate(
            roc_covariate_pp(simulate_poisson(m.intensity, pp.window, rng), Z), p)), 2, 4)
        assert np.allclose(env.lower, np.minimum(*curves)) and np.allclose(env.upper, np.maximum(*curves))

    def test_envelope_width_bounded_by_binomial(self, fitted):
        pp, Z, m = fitted
        env = envelope(m, Z, pp.window, nsim=50, seed=8)
        sd_max = np.sqrt(0.25 / pp.n)
        assert np.max(env.width()) < 8 * sd_max

    def test_band_contains_and_json(self, fitted):
        pp, Z, m = fitted
        b = envelope(m, Z, pp.window, nsim=4, seed=1, p=[0.0, 1.0])
        assert np.all(b.contains([0.0, 1.0]))
        assert isinstance(b, ConfidenceBand)
        json.dumps(b.as_dict())

    def test_nsim_validation(self, fitted):
        pp, Z, m = fitted
        with pytest.raises(ValueError):
            envelope(m, Z, pp.window, nsim=1)
