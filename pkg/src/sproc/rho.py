"""Resource selection functions rho(z) and their link with the ROC curve.

If the intensity is ``lambda(u) = rho(Z(u))``, the theoretical C-ROC has
slope ``rho(FP^{-1}(p)) / kappa`` where ``kappa`` is the mean intensity, so
the curve is the integral of the normalised rho along the quantiles of the
spatial distribution of Z.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .roc import RocCurve
from .smoothing import silverman_bandwidth
from .spatial import PointPattern, Raster, StepCdf, Window, window_cells, spatial_cdf


@dataclass(frozen=True)
class RhoEstimate:
    """Estimate of rho on a grid of covariate values.

    ``interpolation`` is ``"linear"`` for smooth estimates and ``"step"`` for
    isotonic fits, which are constant on each covariate value.
    """

    z: np.ndarray
    rho: np.ndarray
    method: str
    lambda_total: float
    area: float
    bandwidth: Optional[float] = None
    masked: Optional[np.ndarray] = None
    interpolation: str = "linear"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def kappa(self) -> float:
        """Mean intensity ``lambda_total / area``."""
        return self.lambda_total / self.area

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        ok = np.isfinite(self.rho)
        zz, rr = self.z[ok], self.rho[ok]
        if self.interpolation == "step":
            k = np.clip(np.searchsorted(zz, z, side="left"), 0, zz.size - 1)
            # nearest of the two neighbouring support values
            km = np.maximum(k - 1, 0)
            use_prev = np.abs(z - zz[km]) < np.abs(zz[k] - z)
            return np.where(use_prev, rr[km], rr[k])
        return np.interp(z, zz, rr)

    def as_dict(self):
        r = lambda a: [None if not np.isfinite(x) else float(f"{x:.12g}") for x in np.asarray(a)]
        return {"method": self.method, "z": r(self.z), "rho": r(self.rho),
                "kappa": float(f"{self.kappa:.12g}"),
                "lambda_total": float(f"{self.lambda_total:.12g}"),
                "bandwidth": self.bandwidth}


def _reflected_kernel(zgrid, data, h, lo, hi, weights=None):
    """Sum of Gaussian kernels reflected at lo and hi, evaluated on zgrid."""
    w = np.ones(data.size) if weights is None else weights
    out = np.zeros(zgrid.size)
    for centre in (data, 2 * lo - data, 2 * hi - data):
        out += (stats.norm.pdf((zgrid[:, None] - centre[None, :]) / h) / h) @ w
    return out


def estimate_rho_kernel(pp: PointPattern, Z: Raster, W: Optional[Window] = None,
                        bandwidth="auto", n_grid=512, floor=1e-12) -> RhoEstimate:
    """Ratio-of-smoothed-densities estimate of rho.

    ``rho(z) = sum_i k_h(z - z_i) / sum_cells a_c k_h(z - Z_c)``, where ``k_h``
    is a Gaussian kernel reflected at the range of Z over the window. The
    denominator is the smoothed area density of Z, so the estimate is an
    intensity. ``bandwidth="auto"`` applies Silverman's rule to the z_i.
    """
    W = W or pp.window
    if pp.n == 0:
        raise ValueError("empty point pattern")
    z = Z.lookup(pp.x, pp.y)
    z = z[np.isfinite(z)]
    cells = window_cells(Z, W)
    if cells.values.size == 0 or z.size == 0:
        raise ValueError("no covariate values available")
    uz, inv = np.unique(cells.values, return_inverse=True)
    if uz.size < 2:
        raise ValueError("covariate is constant on the window")
    ua = np.bincount(inv, weights=cells.weights)
    lo, hi = float(uz[0]), float(uz[-1])
    h = silverman_bandwidth(z) if bandwidth in (None, "auto") else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    zgrid = np.linspace(lo, hi, n_grid)
    num = _reflected_kernel(zgrid, z, h, lo, hi)
    den = _reflected_kernel(zgrid, uz, h, lo, hi, ua)
    masked = den < floor * den.max()
    rho = np.where(masked, np.nan, num / np.where(masked, 1.0, den))
    area = float(cells.weights.sum())
    est = RhoEstimate(zgrid, rho, "kernel", 0.0, area, h, masked, "linear",
                      {"n": int(z.size)})
    total = float(np.sum(ua * est(uz)))
    return RhoEstimate(zgrid, rho, "kernel", total, area, h, masked, "linear", {"n": int(z.size)})


def pava(y, w=None, increasing=True) -> np.ndarray:
    """Weighted least-squares isotonic fit by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    w = np.ones(y.size) if w is None else np.asarray(w, dtype=float)
    if not increasing:
        return -pava(-y, w, True)
    means, weights, sizes = [], [], []
    for yi, wi in zip(y, w):
        means.append(yi)
        weights.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, s2 = means.pop(), weights.pop(), sizes.pop()
            m1, w1, s1 = means.pop(), weights.pop(), sizes.pop()
            wt = w1 + w2
            means.append((w1 * m1 + w2 * m2) / wt if wt > 0 else 0.5 * (m1 + m2))
            weights.append(wt)
            sizes.append(s1 + s2)
    return np.repeat(means, sizes)


def estimate_rho_isotonic(pp: PointPattern, Z: Raster, W: Optional[Window] = None,
                          direction="increasing") -> RhoEstimate:
    """Monotone estimate of rho from cell counts.

    Cells sharing a covariate value are pooled; the pooled rates
    ``count / area`` are then fitted by weighted isotonic regression with the
    areas as weights. The total expected count equals n exactly.
    """
    if direction not in ("increasing", "decreasing"):
        raise ValueError("direction must be 'increasing' or 'decreasing'")
    W = W or pp.window
    if pp.n == 0:
        raise ValueError("empty point pattern")
    cells = window_cells(Z, W)
    if cells.values.size == 0:
        raise ValueError("no covariate values available")
    idx = Z.grid.flat_index(pp.x, pp.y)
    counts = np.bincount(idx[idx >= 0], minlength=Z.grid.nrow * Z.grid.ncol)[cells.flat_index]
    uz, inv = np.unique(cells.values, return_inverse=True)
    n_u = np.bincount(inv, weights=counts.astype(float))
    a_u = np.bincount(inv, weights=cells.weights)
    fit = pava(n_u / a_u, a_u, direction == "increasing")
    area = float(a_u.sum())
    return RhoEstimate(uz, fit, "isotonic", float(np.sum(fit * a_u)), area, None, None, "step",
                       {"n": int(counts.sum()), "direction": direction})


def roc_from_rho(rho: RhoEstimate, F0: StepCdf, kappa: Optional[float] = None,
                 direction="high", n_grid=512) -> RocCurve:
    """Theoretical C-ROC implied by rho and the spatial CDF of Z.

    ``R(p) = (1 / kappa) int_0^p rho(FP^{-1}(v)) dv`` by the midpoint rule on
    the union of the jump points of FP and a uniform grid; the midpoint rule
    is exact on each step of F0. The result is rescaled so that R(1) = 1; a
    warning is issued if the raw endpoint is more than 1% away from 1.
    """
    kappa = rho.kappa if kappa is None else float(kappa)
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    jumps = 1.0 - np.concatenate(([0.0], F0.values))
    p = np.unique(np.clip(np.concatenate([jumps, np.linspace(0, 1, n_grid)]), 0, 1))
    mid = 0.5 * (p[1:] + p[:-1])
    zq = F0.quantile(1.0 - mid) if direction == "high" else F0.quantile(mid)
    vals = np.asarray(rho(zq), dtype=float)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("rho must be finite and nonnegative")
    R = np.concatenate(([0.0], np.cumsum(vals * np.diff(p)))) / kappa
    end = R[-1]
    if not end > 0:
        raise ValueError("rho integrates to zero")
    if abs(end - 1.0) > 0.01:
        warnings.warn(f"rho and kappa are inconsistent: R(1) = {end:.4f} before normalisation",
                      RuntimeWarning, stacklevel=2)
    R = np.clip(R / end, 0.0, 1.0)
    R[-1] = 1.0
    return RocCurve(p, R, None, direction, "area", "theoretical",
                    {"raw_endpoint": float(end), "method": rho.method})


def rho_from_roc(curve: RocCurve, F0: StepCdf, kappa: float, area: float = 1.0) -> RhoEstimate:
    """Recover rho from a differentiable ROC curve: ``rho(FP^{-1}(p)) = kappa R'(p)``.

    Derivatives are central differences on the knots (one-sided at the ends).
    Knots mapping to the same covariate value are averaged.
    """
    if curve.provenance == "empirical":
        raise ValueError("empirical ROC curves are step functions; smooth the curve first "
                         "(smooth_roc) or supply a theoretical curve")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    p, r = curve.p, curve.r
    keep = np.concatenate(([True], np.diff(p) > 0))
    p, r = p[keep], r[keep]
    if p.size < 3:
        raise ValueError("curve has too few knots to differentiate")
    d = np.gradient(r, p)
    q = 1.0 - p if curve.direction == "high" else p
    z = F0.quantile(np.clip(q, 0.0, 1.0))
    uz, inv = np.unique(z, return_inverse=True)
    rho = kappa * np.bincount(inv, weights=d) / np.bincount(inv)
    return RhoEstimate(uz, rho, "from-roc", kappa * area, area, None, None, "linear")
