import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from sproc.roc import (RocCurve, auc, curve_from_json, curve_to_csv, curve_to_json, evaluate, gini,
                       reverse, roc_binary, roc_casecontrol, roc_covariate_grid, roc_covariate_pp,
                       youden)
from sproc.spatial import Grid, PointPattern, PresenceGrid, Raster, Window


def pair_count_auc(pos, neg, wpos=None, wneg=None):
    """Exhaustive pair comparison with half credit for ties."""
    pos, neg = np.asarray(pos, float), np.asarray(neg, float)
    wpos = np.ones(pos.size) if wpos is None else np.asarray(wpos, float)
    wneg = np.ones(neg.size) if wneg is None else np.asarray(wneg, float)
    tot = 0.0
    for a, wa in zip(pos, wpos):
        for b, wb in zip(neg, wneg):
            tot += wa * wb * (1.0 if a > b else 0.5 if a == b else 0.0)
    return tot / (wpos.sum() * wneg.sum())


scores_labels = st.integers(2, 40).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 6), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
)).filter(lambda t: 0 < sum(t[1]) < len(t[1]))


class TestRocCurve:
    def test_endpoints_required(self):
        with pytest.raises(ValueError):
            RocCurve([0, 0.5], [0, 0.5])
        with pytest.raises(ValueError):
            RocCurve([0, 0.6, 0.5, 1], [0, 0.2, 0.3, 1])

    def test_diagonal_summaries(self):
        c = RocCurve([0, 1], [0, 1])
        assert auc(c) == 0.5 and youden(c) == 0 and gini(c) == 0


class TestRocBinary:
    def test_perfect_separation(self):
        c = roc_binary([5, 4, 1, 0], [1, 1, 0, 0])
        assert auc(c) == 1.0
        assert np.any((c.p == 0) & (c.r == 1))

    def test_constant_scores_diagonal(self):
        c = roc_binary(np.ones(7), [1, 0, 1, 0, 0, 1, 0])
        assert auc(c) == 0.5
        assert np.allclose(c.p, [0, 1]) and np.allclose(c.r, [0, 1])

    def test_four_point_pair_count(self):
        s, y = [3, 2, 1, 0], [1, 0, 1, 0]
        c = roc_binary(s, y)
        assert auc(c) == pytest.approx(0.75, abs=1e-15)
        assert auc(c) == pytest.approx(pair_count_auc([3, 1], [2, 0]), abs=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError):
            roc_binary([1, 2], [0, 0])
        with pytest.raises(ValueError):
            roc_binary([1, 2], [1, 1])
        roc_binary([1, 2], [1, 1], fp_convention="all")

    @given(scores_labels)
    def test_auc_equals_pair_count(self, data):
        s, y = np.array(data[0], float), np.array(data[1])
        c = roc_binary(s, y)
        assert auc(c) == pytest.approx(pair_count_auc(s[y == 1], s[y == 0]), abs=1e-12)

    @given(scores_labels)
    def test_auc_equals_mann_whitney(self, data):
        s, y = np.array(data[0], float), np.array(data[1])
        pos, neg = s[y == 1], s[y == 0]
        u = stats.mannwhitneyu(pos, neg).statistic
        assert auc(roc_binary(s, y)) == pytest.approx(u / (pos.size * neg.size), abs=1e-12)

    @given(scores_labels)
    def test_reverse_and_low_direction(self, data):
        s, y = np.array(data[0], float), np.array(data[1])
        c = roc_binary(s, y)
        assert auc(reverse(c)) == pytest.approx(1 - auc(c), abs=1e-12)
        assert auc(roc_binary(s, y, direction="low")) == pytest.approx(1 - auc(c), abs=1e-12)
        assert gini(c) == pytest.approx(2 * auc(c) - 1, abs=1e-15)

    @given(scores_labels)
    def test_knots_are_jump_points(self, data):
        s, y = np.array(data[0], float), np.array(data[1])
        c = roc_binary(s, y)
        t = c.thresholds[1:]
        assert np.all(np.diff(t) < 0)
        pos, neg = s[y == 1], s[y == 0]
        for k, tk in enumerate(t, start=1):
            assert c.r[k] == pytest.approx(np.mean(pos >= tk), abs=1e-12)
            assert c.p[k] == pytest.approx(np.mean(neg >= tk), abs=1e-12)


class TestGridAndPoints:
    def test_oracle_covariate_auc_one(self, rng, grid20):
        status = (rng.random(grid20.shape) < 0.3).astype(float)
        pg = PresenceGrid(grid20, status)
        c = roc_covariate_grid(pg, Raster(grid20, status), fp_convention="absence")
        assert auc(c) == 1.0

    def test_permutation_mean_half(self, rng, grid20):
        status = (rng.random(grid20.shape) < 0.3).astype(float)
        pg = PresenceGrid(grid20, status)
        z = rng.normal(size=grid20.shape)
        aucs = [auc(roc_covariate_grid(pg, Raster(grid20, rng.permutation(z.ravel()).reshape(z.shape))))
                for _ in range(1000)]
        assert abs(np.mean(aucs) - 0.5) < 4 * np.std(aucs) / np.sqrt(1000)

    def test_constant_baseline_is_unweighted(self, rng, grid20, zx20):
        pg = PresenceGrid(grid20, (rng.random(grid20.shape) < 0.3).astype(float))
        a = roc_covariate_grid(pg, zx20)
        b = roc_covariate_grid(pg, zx20, baseline=Raster(grid20, np.full(grid20.shape, 7.0)))
        assert np.allclose(a.p, b.p, atol=1e-15) and np.allclose(a.r, b.r, atol=1e-15)

    def test_discretised_converges_to_continuous(self, rng, unit_window):
        pp = PointPattern(rng.beta(2, 1, 300), rng.random(300), unit_window)
        gaps = []
        for n in (10, 20, 40, 80):
            g = Grid.covering(0, 1, 0, 1, n)
            Z = Raster.from_function(g, lambda x, y: x + 0.3 * y)
            from sproc.spatial import discretise
            cg = roc_covariate_grid(discretise(pp, g), Z)
            cp = roc_covariate_pp(pp, Z)
            q = np.linspace(0, 1, 401)
            gaps.append(np.max(np.abs(evaluate(cg, q) - evaluate(cp, q))))
        assert gaps[-1] < gaps[0]

    def test_pp_auc_brute_force(self, rng, unit_window):
        g = Grid.covering(0, 1, 0, 1, 15)
        Z = Raster(g, rng.integers(0, 5, g.shape).astype(float))
        pp = PointPattern(rng.random(25), rng.random(25), unit_window)
        c = roc_covariate_pp(pp, Z)
        assert auc(c) == pytest.approx(pair_count_auc(Z.lookup(pp.x, pp.y), Z.values.ravel()), abs=1e-12)

    def test_doubled_weights_identical(self, rng, unit_window, zx20):
        x, y = rng.random(30), rng.random(30)
        w = rng.random(30) + 0.1
        a = roc_covariate_pp(PointPattern(x, y, unit_window, weights=w), zx20)
        b = roc_covariate_pp(PointPattern(x, y, unit_window, weights=2 * w), zx20)
        assert np.allclose(a.p, b.p) and np.allclose(a.r, b.r, atol=1e-15)

    def test_pit_identity(self, rng, unit_window, zx20):
        from sproc.spatial import spatial_cdf
        pp = PointPattern(rng.random(40), rng.random(40), unit_window)
        c = roc_covariate_pp(pp, zx20)
        F0 = spatial_cdf(zx20, unit_window)
        u = F0(zx20.lookup(pp.x, pp.y))
        rv = reverse(c)
        # the reversed curve is the empirical cdf of u_i = F0(Z(x_i)) at its knots
        for q, r in zip(rv.p, rv.r):
            assert r == pytest.approx(np.mean(u <= q + 1e-12), abs=1e-12)

    def test_coordinate_reflection(self, rng):
        W = Window(0, 2, 0, 1)
        g = Grid.covering(0, 2, 0, 1, 20, 10)
        z = rng.normal(size=g.shape)
        x, y = rng.random(20) * 2, rng.random(20)
        a = roc_covariate_pp(PointPattern(x, y, W), Raster(g, z))
        b = roc_covariate_pp(PointPattern(2 - x, y, W), Raster(g, z[:, ::-1]))
        assert np.allclose(a.p, b.p) and np.allclose(a.r, b.r)

    def test_empty_pattern(self, unit_window, zx20):
        with pytest.raises(ValueError):
            roc_covariate_pp(PointPattern([], [], unit_window), zx20)


class TestCaseControl:
    def test_pair_count(self):
        c = roc_casecontrol([2, 3, 0, 1], labels=[1, 1, 0, 0])
        assert auc(c) == 1.0

    def test_label_swap(self, rng):
        s = rng.normal(size=30)
        y = rng.integers(0, 2, 30)
        y[:2] = [0, 1]
        a = auc(roc_casecontrol(s, labels=y))
        assert auc(roc_casecontrol(s, labels=1 - y)) == pytest.approx(1 - a, abs=1e-12)

    def test_single_class(self):
        with pytest.raises(ValueError):
            roc_casecontrol([1.0, 2.0], labels=[1, 1])

    def test_marked_pattern_with_raster(self, rng, unit_window, zx20):
        pp = PointPattern(rng.random(20), rng.random(20), unit_window, marks=np.arange(20) % 2)
        c = roc_casecontrol(pp, zx20)
        z = zx20.lookup(pp.x, pp.y)
        assert auc(c) == pytest.approx(pair_count_auc(z[pp.marks == 1], z[pp.marks == 0]))


class TestEvaluateAndSerialise:
    def test_left_continuous_on_vertical_run(self):
        c = RocCurve([0, 0.5, 0.5, 1], [0, 0.2, 0.8, 1])
        assert evaluate(c, 0.5) == pytest.approx(0.2)
        assert evaluate(c, 0.25) == pytest.approx(0.1)
        assert evaluate(c, 0.75) == pytest.approx(0.9)

    def test_json_round_trip(self, rng):
        c = roc_binary(rng.normal(size=50), np.arange(50) % 2)
        d = json.loads(curve_to_json(c))
        assert set(d["summary"]) == {"auc", "youden1", "youden2", "gini"}
        back = curve_from_json(curve_to_json(c))
        assert np.allclose(back.p, c.p, rtol=1e-11) and np.allclose(back.r, c.r, rtol=1e-11)
        assert curve_to_json(back) == curve_to_json(c)

    def test_csv_rows(self, rng):
        c = roc_binary(rng.normal(size=10), np.arange(10) % 2)
        lines = curve_to_csv(c).strip().split("\n")
        assert lines[0] == "p,r,t" and len(lines) == len(c) + 1
