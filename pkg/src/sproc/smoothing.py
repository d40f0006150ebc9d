"""Kernel-smoothed ROC curves for case-control samples and plug-in bands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import stats

from .inference import ConfidenceBand, _zcrit
from .roc import RocCurve

Bandwidth = Union[float, str, None]


def silverman_bandwidth(samples) -> float:
    """Silverman's rule of thumb ``0.9 min(sd, IQR / 1.34) n^(-1/5)``.

    When the interquartile range is zero but the standard deviation is not,
    the standard deviation alone is used.
    """
    x = np.asarray(samples, dtype=float).ravel()
    x = x[np.isfinite(x)]
    if x.size < 2:
        raise ValueError("at least two samples are needed")
    sd = np.std(x, ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    if not sd > 0:
        raise ValueError("samples have zero spread")
    a = min(sd, iqr / 1.34) if iqr > 0 else sd
    return float(0.9 * a * x.size ** (-0.2))


class _Gaussian:
    support = np.inf

    @staticmethod
    def pdf(u):
        return stats.norm.pdf(u)

    @staticmethod
    def cdf(u):
        return stats.norm.cdf(u)


class _Epanechnikov:
    support = 1.0

    @staticmethod
    def pdf(u):
        return np.where(np.abs(u) <= 1, 0.75 * (1 - u * u), 0.0)

    @staticmethod
    def cdf(u):
        u = np.clip(u, -1.0, 1.0)
        return 0.5 + 0.75 * u - 0.25 * u ** 3


KERNELS = {"gaussian": _Gaussian, "epanechnikov": _Epanechnikov}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel and bandwidths.

    ``h1``/``h2`` smooth the case and control distribution functions,
    ``hf``/``hg`` the densities used in the variance. ``"auto"`` (or None)
    selects Silverman's rule for h1 and h2; hf and hg default to h1 and h2.
    """

    kernel: str = "gaussian"
    h1: Bandwidth = "auto"
    h2: Bandwidth = "auto"
    hf: Bandwidth = None
    hg: Bandwidth = None

    def resolve(self, cases, controls) -> "KernelSpec":
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        auto = lambda h, x: silverman_bandwidth(x) if h in (None, "auto") else float(h)
        h1, h2 = auto(self.h1, cases), auto(self.h2, controls)
        hf = h1 if self.hf in (None, "auto") else float(self.hf)
        hg = h2 if self.hg in (None, "auto") else float(self.hg)
        if min(h1, h2, hf, hg) <= 0:
            raise ValueError("bandwidths must be positive")
        return KernelSpec(self.kernel, h1, h2, hf, hg)


def _smooth_cdf(K, data, h, t):
    t = np.asarray(t, dtype=float)
    return K.cdf((t[..., None] - data) / h).mean(axis=-1)


def _smooth_pdf(K, data, h, t):
    t = np.asarray(t, dtype=float)
    return K.pdf((t[..., None] - data) / h).mean(axis=-1) / h


def _inverse_cdf(K, data, h, q, tol=1e-10):
    """Solve ``G(t) = q`` by vectorised bisection."""
    q = np.asarray(q, dtype=float)
    if q.size == 0:
        return q.copy()
    span = 40.0 * h if K.support == np.inf else 1.0 * h
    lo = np.full(q.shape, data.min() - span)
    hi = np.full(q.shape, data.max() + span)
    n_iter = int(np.ceil(np.log2(max((hi - lo).max(), tol) / tol))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = _smooth_cdf(K, data, h, mid) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _check_groups(cases, controls):
    x = np.asarray(cases, dtype=float).ravel()
    y = np.asarray(controls, dtype=float).ravel()
    if x.size < 2 or y.size < 2:
        raise ValueError("each group needs at least two values")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("values must be finite")
    return x, y


def _smooth_curve_values(x, y, spec: KernelSpec, p, direction):
    K = KERNELS[spec.kernel]
    if direction == "low":
        x, y = -x, -y
    p = np.asarray(p, dtype=float)
    R = np.empty(p.shape)
    t = np.full(p.shape, np.nan)
    inner = (p > 0) & (p < 1)
    t[inner] = _inverse_cdf(K, y, spec.h2, 1.0 - p[inner])
    R[inner] = 1.0 - _smooth_cdf(K, x, spec.h1, t[inner])
    R[p <= 0] = 0.0
    R[p >= 1] = 1.0
    return np.clip(R, 0.0, 1.0), t, x, y


def smooth_roc(cases, controls, spec: Optional[KernelSpec] = None, p=None,
               direction="high") -> RocCurve:
    """Smoothed ROC ``R(p) = 1 - F(G^{-1}(1 - p))`` on a dense p-grid.

    ``F`` and ``G`` are kernel-smoothed distribution functions of the case and
    control values.
    """
    x, y = _check_groups(cases, controls)
    spec = (spec or KernelSpec()).resolve(x, y)
    p = np.linspace(0.0, 1.0, 1001) if p is None else np.unique(np.concatenate(([0.0], p, [1.0])))
    R, t, _, _ = _smooth_curve_values(x, y, spec, p, direction)
    R = np.maximum.accumulate(R)
    thr = -t if direction == "low" else t
    return RocCurve(p, R, thr, direction, "absence", "smoothed",
                    {"h1": spec.h1, "h2": spec.h2, "kernel": spec.kernel})


def smooth_band(cases, controls, spec: Optional[KernelSpec] = None, level=0.95, p=None,
                direction="high", density_floor=1e-12) -> ConfidenceBand:
    """Plug-in asymptotic band around the smoothed ROC.

    ``sigma^2(p) = R (1 - R) / n + (f(t) / g(t))^2 p (1 - p) / m`` with
    ``t = G^{-1}(1 - p)``. Where the control density at t is below
    ``density_floor`` the band is set to [0, 1] and flagged.
    """
    x, y = _check_groups(cases, controls)
    spec = (spec or KernelSpec()).resolve(x, y)
    p = np.linspace(0.0, 1.0, 201) if p is None else np.asarray(p, dtype=float)
    R, t, xs, ys = _smooth_curve_values(x, y, spec, p, direction)
    K = KERNELS[spec.kernel]
    n, m = x.size, y.size
    inner = np.isfinite(t)
    f = np.zeros(p.shape)
    g = np.ones(p.shape)
    f[inner] = _smooth_pdf(K, xs, spec.hf, t[inner])
    g[inner] = _smooth_pdf(K, ys, spec.hg, t[inner])
    flagged = inner & (g < density_floor)
    ratio2 = np.where(flagged, 0.0, (f / np.where(flagged, 1.0, g)) ** 2)
    var = R * (1 - R) / n + ratio2 * p * (1 - p) / m
    half = _zcrit(level) * np.sqrt(np.maximum(var, 0.0))
    lo, hi = R - half, R + half
    lo[flagged], hi[flagged] = 0.0, 1.0
    return ConfidenceBand(p, lo, hi, level, "smooth-plugin", R, flagged,
                          {"h1": spec.h1, "h2": spec.h2, "hf": spec.hf, "hg": spec.hg,
                           "variance": var.tolist()})
