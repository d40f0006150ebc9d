"""Hypothesis tests and confidence bands for ROC curves.

The probability integral transform of a covariate value uses the
mid-distribution ``u = F0(z-) + (F0(z) - F0(z-)) / 2``. For a continuous F0
this is just ``F0(z)``; for a step F0 it makes the mean of the ``u_i`` equal
to the empirical AUC exactly, so Berman's second statistic and the AUC stay
linked when the covariate has ties.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .models import (FitError, LogisticModel, PoissonPPModel, fit_logistic, fit_poisson_loglinear,
                     simulate_logistic, simulate_poisson)
from .roc import RocCurve, evaluate, roc_covariate_grid, roc_covariate_pp
from .spatial import PointPattern, PresenceGrid, Raster, StepCdf, Window, spatial_cdf, window_cells


@dataclass(frozen=True)
class TestResult:
    """Outcome of a hypothesis test."""

    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    sidedness: str
    method: str
    n: int
    alternative: str = "two-sided"

    def as_dict(self):
        return {"method": self.method, "statistic": self.statistic, "p_value": self.p_value,
                "sidedness": self.sidedness, "alternative": self.alternative, "n": self.n}

    def line(self) -> str:
        return (f"{self.method}: statistic={self.statistic:.6g} p={self.p_value:.4g} "
                f"({self.alternative}, n={self.n})")


@dataclass(frozen=True)
class ConfidenceBand:
    """Pointwise band on a p-grid, truncated to [0, 1]."""

    p: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    method: str
    center: Optional[np.ndarray] = None
    flagged: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lo = np.clip(np.asarray(self.lower, dtype=float), 0.0, 1.0)
        hi = np.clip(np.asarray(self.upper, dtype=float), 0.0, 1.0)
        if np.any(lo > hi + 1e-15):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", np.maximum(hi, lo))

    def contains(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        return (v >= self.lower - 1e-12) & (v <= self.upper + 1e-12)

    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def as_dict(self):
        r = lambda a: [float(f"{x:.12g}") for x in np.asarray(a, dtype=float)]
        d = {"method": self.method, "level": self.level, "p": r(self.p),
             "lower": r(self.lower), "upper": r(self.upper)}
        if self.center is not None:
            d["center"] = r(self.center)
        if self.flagged is not None:
            d["flagged"] = [bool(x) for x in self.flagged]
        d["meta"] = self.meta
        return d


def _pvalue_normal(z, alternative):
    if alternative == "two-sided":
        return float(min(1.0, 2 * stats.norm.sf(abs(z))))
    if alternative == "greater":
        return float(stats.norm.sf(z))
    if alternative == "less":
        return float(stats.norm.cdf(z))
    raise ValueError("alternative must be 'two-sided', 'greater' or 'less'")


def _sided(alternative):
    return "two" if alternative == "two-sided" else "one"


# --------------------------------------------------------------------------
# covariate tests for point patterns


def _point_covariate(pp: PointPattern, Z: Raster, W: Optional[Window], baseline=None):
    W = W or pp.window
    if pp.n == 0:
        raise ValueError("empty point pattern")
    z = Z.lookup(pp.x, pp.y)
    z = z[np.isfinite(z)]
    if z.size == 0:
        raise ValueError("covariate is missing at every data point")
    F0 = spatial_cdf(Z, W, baseline)
    if F0.breakpoints.size < 2:
        raise ValueError("covariate is constant on the window: its distribution is degenerate")
    return z, F0, W


def pit_values(z, F0: StepCdf) -> np.ndarray:
    """Mid-distribution probability integral transform."""
    return F0.mid(z)


def berman_tests(pp: PointPattern, Z: Raster, W: Optional[Window] = None,
                 alternative="two-sided", conditional=False) -> dict:
    """Berman's Z1 and Z2 tests of a covariate effect under a Poisson null.

    Z1 standardises ``S = sum_i Z(x_i)`` by the Poisson mean ``lam int Z`` and
    variance ``lam int Z^2`` with ``lam = n / |W|``. Given n that variance is
    too large by ``int Z^2 / (|W| var(Z))``, so the test is conservative;
    ``conditional=True`` uses the variance ``n var(Z)`` of S given n instead.

    Returns
    -------
    dict with keys ``"z1"`` and ``"z2"`` holding TestResult objects.
    """
    z, F0, W = _point_covariate(pp, Z, W)
    n = z.size
    cells = window_cells(Z, W)
    area = cells.weights.sum()
    lam = n / area
    mu = lam * np.sum(cells.values * cells.weights)
    if conditional:
        mean = np.sum(cells.values * cells.weights) / area
        var = n * np.sum((cells.values - mean) ** 2 * cells.weights) / area
    else:
        var = lam * np.sum(cells.values ** 2 * cells.weights)
    if not var > 0:
        raise ValueError("covariate has zero spread or zero second moment on the window")
    T = (z.sum() - mu) / np.sqrt(var)
    u = pit_values(z, F0)
    V2 = np.sqrt(12.0 * n) * (u.mean() - 0.5)
    z1_name = "Berman Z1 (conditional)" if conditional else "Berman Z1"
    return {
        "z1": TestResult(float(T), _pvalue_normal(T, alternative), _sided(alternative),
                         z1_name, n, alternative),
        "z2": TestResult(float(V2), _pvalue_normal(V2, alternative), _sided(alternative),
                         "Berman Z2", n, alternative),
    }


def ks_distance(z, F0: StepCdf):
    """Two-sided and one-sided sup distances between the ECDF of z and F0.

    ``d_plus`` is ``sup (F0 - Fhat)``: positive when the data sit at larger
    covariate values than the window as a whole. Both right values and left
    limits are compared at every jump of either function.
    """
    z = np.sort(np.asarray(z, dtype=float))
    n = z.size
    t = np.union1d(z, F0.breakpoints)
    Fh = np.searchsorted(z, t, side="right") / n
    Fh_left = np.searchsorted(z, t, side="left") / n
    F = F0(t)
    F_left = F0.left(t)
    diff = np.concatenate([F - Fh, F_left - Fh_left])
    return float(np.max(np.abs(diff))), float(max(diff.max(), 0.0)), float(max(-diff.min(), 0.0))


def anderson_darling_pvalue(A2: float) -> float:
    """Upper tail of the asymptotic Anderson-Darling distribution (Marsaglia & Marsaglia)."""
    z = float(A2)
    if z <= 0:
        return 1.0
    if z < 2:
        cdf = np.exp(-1.2337141 / z) / np.sqrt(z) * (
            2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z)
    else:
        cdf = np.exp(-np.exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z))
    return float(np.clip(1.0 - cdf, 0.0, 1.0))


def anderson_darling(u) -> float:
    u = np.sort(np.asarray(u, dtype=float))
    n = u.size
    i = np.arange(1, n + 1)
    return float(-n - np.sum((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1]))) / n)


def cdf_tests(pp: PointPattern, Z: Raster, W: Optional[Window] = None) -> dict:
    """Kolmogorov-Smirnov, Cramer-von Mises and Anderson-Darling tests.

    The null is that the covariate values at the points are a sample from the
    spatial distribution F0 of the covariate over the window, which holds
    for a homogeneous Poisson process.

    Returns
    -------
    dict with keys ``"ks"``, ``"ks_one_sided"``, ``"cvm"``, ``"ad"``.
    """
    z, F0, W = _point_covariate(pp, Z, W)
    n = z.size
    D, Dplus, _ = ks_distance(z, F0)
    u = pit_values(z, F0)
    cvm = stats.cramervonmises(u, "uniform")
    A2 = anderson_darling(u)
    return {
        "ks": TestResult(D, float(stats.kstwo.sf(D, n)), "two", "Kolmogorov-Smirnov", n),
        "ks_one_sided": TestResult(Dplus, float(stats.ksone.sf(Dplus, n)), "one",
                                   "Kolmogorov-Smirnov (one-sided)", n, "greater"),
        "cvm": TestResult(float(cvm.statistic), float(np.clip(cvm.pvalue, 0, 1)), "two",
                          "Cramer-von Mises", n),
        "ad": TestResult(A2, anderson_darling_pvalue(A2), "two", "Anderson-Darling", n),
    }


def wilcoxon_auc(cases, controls, alternative="greater") -> dict:
    """Rank-sum test and the AUC it implies.

    ``U1 = R1 - n1 (n1 + 1) / 2`` with mid-ranks for ties; ``AUC = U1 / (n1 n0)``.
    The p-value uses the normal approximation with the tie-corrected variance
    and no continuity correction.
    """
    x = np.asarray(cases, dtype=float).ravel()
    y = np.asarray(controls, dtype=float).ravel()
    n1, n0 = x.size, y.size
    if n1 == 0 or n0 == 0:
        raise ValueError("both groups must be nonempty")
    ranks = stats.rankdata(np.concatenate([x, y]))
    U1 = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    N = n1 + n0
    _, counts = np.unique(np.concatenate([x, y]), return_counts=True)
    tie = np.sum(counts ** 3 - counts)
    var = n1 * n0 / 12.0 * ((N + 1) - tie / (N * (N - 1))) if N > 1 else 0.0
    if var > 0:
        zstat = (U1 - n1 * n0 / 2.0) / np.sqrt(var)
        p = _pvalue_normal(zstat, alternative)
    else:
        p = 1.0
    res = TestResult(float(U1), p, _sided(alternative), "Wilcoxon rank-sum", N, alternative)
    return {"test": res, "auc": float(U1 / (n1 * n0))}


# --------------------------------------------------------------------------
# bands


def _zcrit(level):
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    return float(stats.norm.ppf(0.5 + level / 2.0))


def default_p_grid(n=201) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


def band_binomial(curve: RocCurve, n: int, level=0.95, p=None) -> ConfidenceBand:
    """Plug-in binomial band ``R(p) +- z sqrt(R (1 - R) / n)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    p = default_p_grid() if p is None else np.asarray(p, dtype=float)
    R = np.asarray(evaluate(curve, p), dtype=float)
    half = _zcrit(level) * np.sqrt(R * (1.0 - R) / n)
    return ConfidenceBand(p, R - half, R + half, level, "binomial-plugin", R, meta={"n": int(n)})


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: SPROC_THREADS overrides the argument; default 1."""
    env = os.environ.get("SPROC_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise ValueError(f"SPROC_THREADS must be an integer, got {env!r}") from None
    return max(1, int(threads or 1))


def run_replicates(fn: Callable, nsim: int, seed=None, threads: Optional[int] = None) -> list:
    """Run ``fn(k, rng)`` for k < nsim with independent child seeds.

    Child generators are spawned from one master seed, so results depend
    only on ``seed`` and not on the number of workers. Exceptions are
    returned in place of results.
    """
    master = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = master.spawn(nsim)

    def one(k):
        try:
            return fn(k, np.random.default_rng(children[k]))
        except (FitError, ValueError, ArithmeticError) as exc:
            return exc

    nt = resolve_threads(threads)
    if nt == 1:
        return [one(k) for k in range(nsim)]
    with ThreadPoolExecutor(max_workers=nt) as ex:
        return list(ex.map(one, range(nsim)))


def _split(results, nsim, max_fail=0.2):
    ok = [r for r in results if not isinstance(r, Exception)]
    failures = nsim - len(ok)
    if failures > max_fail * nsim:
        raise FitError(f"{failures} of {nsim} simulations failed")
    return ok, failures


def _refit_and_roc(model, sim, covariate, direction):
    if isinstance(model, PoissonPPModel):
        if covariate is not None:
            return roc_covariate_pp(sim, covariate, direction)
        if not model.names:
            refit = fit_poisson_loglinear(sim, (), grid=model.intensity.grid)
        else:
            refit = fit_poisson_loglinear(sim, model.covariates, grid=model.intensity.grid)
        from .model_roc import roc_model_pp
        return roc_model_pp(refit, sim)
    if covariate is not None:
        return roc_covariate_grid(sim, covariate, direction)
    refit = fit_logistic(sim, model.covariates or {}, offset=model.offset if model.offset is not None else False)
    from .model_roc import roc_model_grid
    return roc_model_grid(refit, sim)


def band_monte_carlo(model, data, nsim=100, level=0.95, seed=None, covariate: Optional[Raster] = None,
                     direction="high", p=None, threads=None) -> ConfidenceBand:
    """Monte Carlo pointwise band around the observed empirical curve.

    Datasets are simulated from the fitted model, the model is refitted to
    each, and the empirical M-ROC (or the C-ROC of ``covariate``) is
    recomputed. The band is the observed curve plus or minus
    ``z * sd`` of the simulated curves.
    """
    if nsim < 2:
        raise ValueError("nsim must be at least 2")
    p = default_p_grid() if p is None else np.asarray(p, dtype=float)
    if isinstance(model, PoissonPPModel):
        if not isinstance(data, PointPattern):
            raise TypeError("a Poisson model needs point-pattern data")
        W = data.window
        simulate = lambda rng: simulate_poisson(model.intensity, W, rng)
    elif isinstance(model, LogisticModel) and model.kind == "grid":
        if not isinstance(data, PresenceGrid):
            raise TypeError("a grid logistic model needs presence-grid data")
        simulate = lambda rng: simulate_logistic(model.fitted, rng)
    else:
        raise TypeError("unsupported model for Monte Carlo bands")
    observed = _refit_and_roc_observed(model, data, covariate, direction)

    def rep(k, rng):
        sim = simulate(rng)
        return np.asarray(evaluate(_refit_and_roc(model, sim, covariate, direction), p))

    curves, failures = _split(run_replicates(rep, nsim, seed, threads), nsim)
    if len(curves) < 2:
        raise FitError("fewer than two successful simulations")
    sd = np.std(np.vstack(curves), axis=0, ddof=1)
    center = np.asarray(evaluate(observed, p))
    half = _zcrit(level) * sd
    return ConfidenceBand(p, center - half, center + half, level, "monte-carlo", center,
                          meta={"nsim": int(nsim), "failures": int(failures)})


def _refit_and_roc_observed(model, data, covariate, direction):
    if covariate is not None:
        if isinstance(data, PointPattern):
            return roc_covariate_pp(data, covariate, direction)
        return roc_covariate_grid(data, covariate, direction)
    from .model_roc import roc_model_grid, roc_model_pp
    if isinstance(model, PoissonPPModel):
        return roc_model_pp(model, data)
    return roc_model_grid(model, data)


def envelope(model_or_intensity, Z: Optional[Raster], W: Window, nsim=50, rank=1, seed=None,
             direction="high", p=None, threads=None) -> ConfidenceBand:
    """Pointwise simulation envelope of C-ROC curves.

    Point patterns are simulated from the intensity (or the fitted intensity
    of a PoissonPPModel) and the C-ROC of ``Z`` is computed for each; with
    ``Z=None`` the intensity itself is the score. The band runs from the
    ``rank``-th smallest to the ``rank``-th largest value at each p.
    """
    if nsim < 2:
        raise ValueError("nsim must be at least 2")
    if not 1 <= rank <= nsim // 2 + (nsim % 2):
        raise ValueError("rank must lie between 1 and nsim / 2")
    lam = model_or_intensity.intensity if isinstance(model_or_intensity, PoissonPPModel) \
        else model_or_intensity
    score = lam if Z is None else Z
    p = default_p_grid() if p is None else np.asarray(p, dtype=float)

    def rep(k, rng):
        sim = simulate_poisson(lam, W, rng)
        return np.asarray(evaluate(roc_covariate_pp(sim, score, direction), p))

    curves, failures = _split(run_replicates(rep, nsim, seed, threads), nsim)
    arr = np.sort(np.vstack(curves), axis=0)
    m = arr.shape[0]
    r = min(rank, (m + 1) // 2)
    return ConfidenceBand(p, arr[r - 1], arr[m - r], 1.0 - 2.0 * r / (m + 1), "envelope",
                          meta={"nsim": int(nsim), "rank": int(rank), "failures": int(failures)})
