"""Restricted, weighted and partial ROC curves; reconstruction from a partition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .inference import ConfidenceBand
from .model_roc import curve_gap
from .models import LogisticModel, PoissonPPModel, fit_logistic, fit_poisson_loglinear
from .roc import RocCurve, auc, evaluate, roc_covariate_grid, roc_covariate_pp
from .spatial import PointPattern, PresenceGrid, Raster, StepCdf, Window, restrict


def roc_restricted(data: Union[PointPattern, PresenceGrid], Z: Raster, B: Window,
                   direction="high", **kwargs) -> RocCurve:
    """C-ROC with every sum and integral restricted to region B."""
    sub = restrict(data, B)
    if isinstance(sub, PointPattern):
        if sub.n == 0:
            raise ValueError("no data points inside the restriction region")
        return roc_covariate_pp(sub, Z, direction, **kwargs)
    if sub.n_present == 0:
        raise ValueError("no present cells inside the restriction region")
    return roc_covariate_grid(sub, restrict(Z, B), direction, **kwargs)


def horvitz_thompson_weights(q) -> np.ndarray:
    """Inverse detection probabilities ``w_i = 1 / q_i``; they weight TP only."""
    q = np.asarray(q, dtype=float)
    if np.any(~np.isfinite(q)) or np.any(q <= 0) or np.any(q > 1):
        raise ValueError("detection probabilities must lie in (0, 1]")
    return 1.0 / q


# --------------------------------------------------------------------------
# partial ROC


def _refit(model, data, covariates):
    if isinstance(model, PoissonPPModel):
        return fit_poisson_loglinear(data, covariates, grid=model.intensity.grid,
                                     tol=model.tol, max_iter=model.max_iter)
    if isinstance(model, LogisticModel) and model.kind == "grid":
        return fit_logistic(data, covariates, offset=model.offset if model.offset is not None else False,
                            tol=model.tol, max_iter=model.max_iter)
    raise TypeError("partial ROC needs a Poisson or grid logistic model")


def _baseline_of(model) -> Raster:
    if isinstance(model, PoissonPPModel):
        return model.intensity
    return model.fitted.as_raster()


def _partial_curve(data, candidate: Raster, baseline: Raster, direction) -> RocCurve:
    if isinstance(data, PointPattern):
        return roc_covariate_pp(data, candidate, direction, baseline=baseline)
    return roc_covariate_grid(data, candidate, direction, "all", baseline=baseline)


def partial_roc_drop(model, drop: str, data=None, direction="high") -> RocCurve:
    """Partial ROC for removing covariate ``drop`` from a fitted model.

    The model is refitted without the covariate and the C-ROC of the dropped
    covariate is computed relative to the reduced model's fitted intensity
    (or probability) as baseline. A near-diagonal curve means the covariate
    adds little.
    """
    if model.covariates is None or drop not in model.covariates:
        raise KeyError(f"covariate {drop!r} is not in the model")
    data = model.data if data is None else data
    reduced = {k: v for k, v in model.covariates.items() if k != drop}
    fit = _refit(model, data, reduced)
    c = _partial_curve(data, model.covariates[drop], _baseline_of(fit), direction)
    c.meta.update({"covariate": drop, "mode": "drop"})
    return c


def partial_roc_add(model, candidate: Raster, data=None, direction="high",
                    name: str = "candidate") -> RocCurve:
    """Partial ROC for adding ``candidate``: its C-ROC with the original fit as baseline."""
    data = model.data if data is None else data
    c = _partial_curve(data, candidate, _baseline_of(model), direction)
    c.meta.update({"covariate": name, "mode": "add"})
    return c


def partial_panel(curves: Sequence[RocCurve]) -> list:
    """JSON-ready summary rows for a set of partial ROC curves."""
    return [{"covariate": c.meta.get("covariate"), "mode": c.meta.get("mode"),
             "partial_auc": float(f"{auc(c):.12g}"), "curve_ref": f"{c.meta.get('covariate')}.json"}
            for c in curves]


# --------------------------------------------------------------------------
# reconstruction from a partition


def reconstruct_partition(R1: RocCurve, R2: RocCurve, n1: float, n2: float, a1: float, a2: float,
                          F1: StepCdf, F2: StepCdf) -> RocCurve:
    """Pooled C-ROC from the curves of two disjoint subregions.

    The pooled false positive rate at threshold t is the area-weighted mix
    ``(a1 FP1(t) + a2 FP2(t)) / (a1 + a2)`` and the pooled true positive rate
    is the count-weighted mix of ``R_i(FP_i(t))``. For a high-favourable
    curve ``FP_i(t) = 1 - F_i(t-)``. Evaluating at every jump of F1 or F2
    reproduces the knots of the curve computed from the pooled data.
    """
    if R1.direction != R2.direction:
        raise ValueError("both curves must have the same direction")
    if not n1 + n2 > 0:
        raise ValueError("total number of points is zero")
    if min(n1, n2, a1, a2) < 0 or not a1 + a2 > 0:
        raise ValueError("counts and areas must be nonnegative with positive total area")
    t = np.union1d(F1.breakpoints, F2.breakpoints)
    if R1.direction == "high":
        t = t[::-1]
        fp1, fp2 = 1.0 - F1.left(t), 1.0 - F2.left(t)
    else:
        fp1, fp2 = F1(t), F2(t)
    fp1, fp2 = np.clip(fp1, 0, 1), np.clip(fp2, 0, 1)
    tp1 = np.asarray(evaluate(R1, fp1)) if n1 > 0 else np.zeros(t.size)
    tp2 = np.asarray(evaluate(R2, fp2)) if n2 > 0 else np.zeros(t.size)
    p = (a1 * fp1 + a2 * fp2) / (a1 + a2)
    r = (n1 * tp1 + n2 * tp2) / (n1 + n2)
    p = np.clip(np.concatenate(([0.0], p)), 0, 1)
    r = np.clip(np.concatenate(([0.0], r)), 0, 1)
    p, r = np.maximum.accumulate(p), np.maximum.accumulate(r)
    p[-1] = r[-1] = 1.0
    return RocCurve(p, r, np.concatenate(([np.nan], t)), R1.direction, "area", R1.provenance)


# --------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class Comparison:
    max_gap: float
    p_grid: np.ndarray
    gap: np.ndarray
    inside_band: Optional[float] = None

    def as_dict(self):
        r = lambda a: [float(f"{x:.12g}") for x in a]
        return {"max_gap": float(f"{self.max_gap:.12g}"), "p": r(self.p_grid), "gap": r(self.gap),
                "inside_band": self.inside_band}


def compare_roc(empirical: RocCurve, predicted: RocCurve,
                band: Optional[ConfidenceBand] = None) -> Comparison:
    """Sup-norm gap between two curves and optional band inclusion.

    ``inside_band`` is the fraction of the band's p-grid at which the
    empirical curve lies inside the band.
    """
    p, lo, hi = curve_gap(empirical, predicted)
    gap = np.where(np.abs(hi) > np.abs(lo), hi, lo)
    inside = None
    if band is not None:
        inside = float(np.mean(band.contains(evaluate(empirical, band.p))))
    return Comparison(float(np.max(np.abs(gap))), p, gap, inside)
