"""Model ROC curves, theoretical curves and their structural properties.

Theoretical curves are exact on the cell set: cells are sorted by the
discriminant and TP/FP are cumulative sums of cell masses, so no p-grid
approximation enters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .models import LogisticModel, PoissonPPModel, loo_all
from .roc import RocCurve, curve_from_masses, evaluate, roc_covariate_grid
from .spatial import PointPattern, PresenceGrid, ProbabilityGrid, Raster, Window, _aligned


def _as_raster(x) -> Raster:
    if isinstance(x, ProbabilityGrid):
        return x.as_raster()
    if isinstance(x, Raster):
        return x
    raise TypeError(f"expected a Raster or ProbabilityGrid, got {type(x).__name__}")


def roc_model_grid(model: Union[LogisticModel, ProbabilityGrid, Raster], grid: PresenceGrid,
                   loo=False, fp_convention="all", baseline: Optional[Raster] = None) -> RocCurve:
    """Empirical M-ROC of fitted presence probabilities against observed presence.

    Parameters
    ----------
    model : LogisticModel, ProbabilityGrid or Raster
        Fitted model or externally supplied scores.
    loo : bool
        Use leave-one-out fitted values (requires a LogisticModel).
    """
    if loo:
        if not isinstance(model, LogisticModel) or model.kind != "grid":
            raise ValueError("leave-one-out scores need a grid LogisticModel")
        scores = Raster(model.fitted.grid, loo_all(model))
    elif isinstance(model, LogisticModel):
        scores = model.fitted.as_raster()
    else:
        scores = _as_raster(model)
    c = roc_covariate_grid(grid, scores, "high", fp_convention, baseline)
    c.meta["loo"] = bool(loo)
    return c


def roc_model_pp(model: Union[PoissonPPModel, Raster], pp: PointPattern, loo=False) -> RocCurve:
    """Empirical M-ROC for a point pattern.

    TP uses the (leave-one-out) fitted intensity at the data points and FP the
    fraction of window area where the fitted intensity exceeds the threshold.
    """
    if pp.n == 0:
        raise ValueError("empty point pattern")
    lam = model.intensity if isinstance(model, PoissonPPModel) else _as_raster(model)
    if loo:
        if not isinstance(model, PoissonPPModel):
            raise ValueError("leave-one-out scores need a PoissonPPModel")
        if model.data is not pp:
            raise ValueError("leave-one-out needs the pattern the model was fitted to")
        s = loo_all(model)
    else:
        s = lam.lookup(pp.x, pp.y)
    ok = np.isfinite(s)
    if not np.any(ok):
        raise ValueError("fitted intensity is missing at every data point")
    inside = pp.window.cell_mask(lam.grid) & np.isfinite(lam.values)
    ref = lam.values[inside]
    meta = {"n_points": int(ok.sum()), "n_points_missing": int((~ok).sum()), "loo": bool(loo)}
    return curve_from_masses(s[ok], pp.point_weights()[ok], ref,
                             np.full(ref.size, lam.grid.cell_area), "high", "area", meta=meta)


def roc_theoretical(S, intensity, window: Optional[Window] = None,
                    baseline: Optional[Raster] = None, fp_convention: Optional[str] = None,
                    direction="high", provenance="theoretical") -> RocCurve:
    """Theoretical ROC of discriminant S when the truth is ``intensity``.

    Parameters
    ----------
    S : Raster or ProbabilityGrid
        Discriminant. Pass the intensity itself for the theoretical M-ROC.
    intensity : Raster or ProbabilityGrid
        A Raster is read as a point-process intensity: TP weights are
        ``lambda * area`` and FP weights ``area * baseline``. A ProbabilityGrid
        gives presence probabilities: TP weights ``pi`` and FP weights
        ``1 - pi`` (``"absence"``, the default) or 1 (``"all"``).
    window : Window, optional
        Defaults to the bounding rectangle of the intensity grid.
    """
    is_prob = isinstance(intensity, ProbabilityGrid)
    lam = _as_raster(intensity)
    g = lam.grid
    s = _aligned(_as_raster(S), g).values.ravel()
    v = lam.values.ravel()
    W = window or lam.bounding_window()
    use = W.cell_mask(g).ravel() & np.isfinite(v) & np.isfinite(s)
    if np.any(v[use] < 0):
        raise ValueError("intensity must be nonnegative")
    b = np.ones(v.size)
    if baseline is not None:
        b = np.nan_to_num(_aligned(baseline, g).values.ravel(), nan=0.0)
        if np.any(b[use] < 0):
            raise ValueError("baseline must be nonnegative")
    if is_prob:
        conv = fp_convention or "absence"
        tp_w = v[use]
        fp_w = (1.0 - v[use]) if conv == "absence" else np.ones(tp_w.size)
        fp_w = fp_w * b[use]
    else:
        conv = fp_convention or "area"
        tp_w = v[use] * g.cell_area
        fp_w = b[use] * g.cell_area
    if not tp_w.sum() > 0:
        raise ValueError("total intensity is zero")
    return curve_from_masses(s[use], tp_w, s[use], fp_w, direction, conv, provenance,
                             meta={"n_cells": int(use.sum())})


# --------------------------------------------------------------------------
# structural checks


@dataclass(frozen=True)
class ShapeReport:
    name: str
    classification: str
    max_violation: float
    concave: bool
    convex: bool

    def as_dict(self):
        return {"name": self.name, "classification": self.classification,
                "max_violation": self.max_violation, "p_grid": None}


def check_concavity(curve: RocCurve, tol=1e-9, name="curve") -> ShapeReport:
    """Classify a knot polyline as concave, convex, linear or neither.

    Successive segment directions are compared by their normalised cross
    product; a concave curve only turns clockwise. A vertical first segment is
    compatible with concavity, a vertical last segment with convexity.
    ``max_violation`` is the largest turn against concavity.
    """
    v = np.diff(curve.knots, axis=0)
    length = np.hypot(v[:, 0], v[:, 1])
    v = v[length > 0] / length[length > 0][:, None]
    if v.shape[0] < 2:
        return ShapeReport(name, "linear", 0.0, True, True)
    cross = v[:-1, 0] * v[1:, 1] - v[:-1, 1] * v[1:, 0]
    up, down = float(max(cross.max(), 0.0)), float(max(-cross.min(), 0.0))
    concave, convex = up <= tol, down <= tol
    if concave and convex:
        cls = "linear"
    elif concave:
        cls = "concave"
    elif convex:
        cls = "convex"
    else:
        cls = "neither"
    return ShapeReport(name, cls, up, concave, convex)


def _union_grid(*curves) -> np.ndarray:
    return np.unique(np.concatenate([c.p for c in curves]))


def _upper(curve: RocCurve, p) -> np.ndarray:
    """Right-continuous (upper) value of the polyline at p."""
    P, R = curve.p, curve.r
    k = np.searchsorted(P, p, side="right") - 1
    k = np.clip(k, 0, P.size - 1)
    hit = P[k] == p
    lo = evaluate(curve, p)
    return np.where(hit, R[k], lo)


def curve_gap(a: RocCurve, b: RocCurve):
    """Signed gaps ``a - b`` on the union of knot p-values.

    Both the lower and the upper value are compared at p-values shared by
    vertical segments, so the maximum is the exact sup over the polylines.
    """
    p = _union_grid(a, b)
    lo = np.asarray(evaluate(a, p)) - np.asarray(evaluate(b, p))
    hi = _upper(a, p) - _upper(b, p)
    return p, lo, hi


@dataclass(frozen=True)
class DominanceReport:
    max_violation: float
    min_gap: float
    p_grid: np.ndarray
    gap: np.ndarray

    @property
    def holds(self) -> bool:
        return self.max_violation <= 1e-9


def check_dominance(S: Raster, lam: Raster, W: Optional[Window] = None) -> DominanceReport:
    """Compare the theoretical M-ROC ``R_{lam,lam}`` with the C-ROC ``R_{S,lam}``.

    ``max_violation`` is the largest amount by which the C-ROC exceeds the
    M-ROC anywhere on [0, 1].
    """
    m = roc_theoretical(lam, lam, W)
    c = roc_theoretical(S, lam, W)
    p, lo, hi = curve_gap(m, c)
    gap = np.minimum(lo, hi)
    return DominanceReport(float(max(-gap.min(), 0.0)), float(gap.min()), p, gap)


def lorenz_curve(lam: Raster, W: Optional[Window] = None):
    """Lorenz curve of a nonnegative field: area share vs mass share, ascending."""
    W = W or lam.bounding_window()
    v = lam.values[W.cell_mask(lam.grid) & np.isfinite(lam.values)]
    if np.any(v < 0):
        raise ValueError("intensity must be nonnegative")
    v = np.sort(v)
    q = np.concatenate(([0.0], np.arange(1, v.size + 1) / v.size))
    L = np.concatenate(([0.0], np.cumsum(v) / v.sum()))
    return q, L


@dataclass(frozen=True)
class LorenzReport:
    max_discrepancy: float
    p_grid: np.ndarray


def lorenz_equivalence(lam: Raster, W: Optional[Window] = None) -> LorenzReport:
    """Compare ``R_{lam,lam}(p)`` with ``1 - L(1 - p)`` for the Lorenz curve L."""
    m = roc_theoretical(lam, lam, W)
    q, L = lorenz_curve(lam, W)
    p = np.unique(np.concatenate([m.p, 1.0 - q]))
    p = np.clip(p, 0.0, 1.0)
    r_lorenz = 1.0 - np.interp(1.0 - p, q, L)
    d = np.abs(np.asarray(evaluate(m, p)) - r_lorenz)
    return LorenzReport(float(d.max()), p)
