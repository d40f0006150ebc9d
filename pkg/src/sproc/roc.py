"""Empirical ROC curves, their summaries and serialisation.

A curve is stored as a polyline through knots ``(p_k, r_k)`` running from
(0, 0) to (1, 1). Knot ``k`` carries the threshold ``t_k``: for a
high-favourable score the knot is the pair (FP, TP) of the rule "classify as
positive when the score is >= t_k". Tied scores share one knot, so the
trapezoidal area equals the Mann-Whitney probability with half credit for
ties.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .spatial import PointPattern, PresenceGrid, Raster, window_cells, _aligned

DIRECTIONS = ("high", "low")
FP_CONVENTIONS = ("absence", "all", "area")
PROVENANCES = ("empirical", "theoretical", "model-predicted", "smoothed")


def _ro(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RocCurve:
    """Monotone polyline from (0, 0) to (1, 1).

    Parameters
    ----------
    p, r : array_like
        False and true positive rates at the knots.
    thresholds : array_like, optional
        Score threshold per knot; NaN at knots that are not attained by a
        threshold (the endpoints).
    direction : {"high", "low"}
        Whether large or small scores indicate presence.
    fp_convention : {"absence", "all", "area"}
        Denominator used for the false positive rate.
    provenance : {"empirical", "theoretical", "model-predicted", "smoothed"}
    meta : dict
        Free-form counts (points used, cells missing, ...).
    """

    p: np.ndarray
    r: np.ndarray
    thresholds: Optional[np.ndarray] = None
    direction: str = "high"
    fp_convention: str = "area"
    provenance: str = "empirical"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        r = np.asarray(self.r, dtype=float)
        if p.ndim != 1 or p.shape != r.shape or p.size < 2:
            raise ValueError("p and r must be equal-length 1-d arrays with at least 2 knots")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(r))):
            raise ValueError("knots must be finite")
        if p[0] != 0 or r[0] != 0 or p[-1] != 1 or r[-1] != 1:
            raise ValueError("curve must start at (0, 0) and end at (1, 1)")
        if np.any(np.diff(p) < 0) or np.any(np.diff(r) < 0):
            raise ValueError("knots must be nondecreasing in both coordinates")
        if np.any((p < 0) | (p > 1) | (r < 0) | (r > 1)):
            raise ValueError("knots must lie in the unit square")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if self.fp_convention not in FP_CONVENTIONS:
            raise ValueError(f"fp_convention must be one of {FP_CONVENTIONS}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        object.__setattr__(self, "p", _ro(p))
        object.__setattr__(self, "r", _ro(r))
        if self.thresholds is not None:
            t = np.asarray(self.thresholds, dtype=float)
            if t.shape != p.shape:
                raise ValueError("thresholds must have one entry per knot")
            object.__setattr__(self, "thresholds", _ro(t))

    @property
    def knots(self) -> np.ndarray:
        return np.column_stack([self.p, self.r])

    def __len__(self):
        return self.p.size

    def __call__(self, p):
        return evaluate(self, p)

    def same_knots(self, other: "RocCurve") -> bool:
        """Exact knot-for-knot equality (thresholds ignored)."""
        return (self.p.shape == other.p.shape and np.array_equal(self.p, other.p)
                and np.array_equal(self.r, other.r))

    def summary(self) -> "RocSummary":
        return summarize(self)


@dataclass(frozen=True)
class RocSummary:
    auc: float
    youden_one_sided: float
    youden_two_sided: float
    gini: float

    def as_dict(self):
        return {"auc": self.auc, "youden1": self.youden_one_sided,
                "youden2": self.youden_two_sided, "gini": self.gini}


# --------------------------------------------------------------------------
# construction


def _check_direction(direction):
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


def curve_from_masses(pos_scores, pos_weights, ref_scores, ref_weights, direction="high",
                      fp_convention="area", provenance="empirical", meta=None) -> RocCurve:
    """ROC curve of weighted positive scores against a weighted reference.

    The true positive rate at threshold t is the share of positive weight with
    score >= t; the false positive rate is the share of reference weight with
    score >= t (reverse both inequalities when ``direction == "low"``).
    """
    _check_direction(direction)
    pos = np.asarray(pos_scores, dtype=float).ravel()
    ref = np.asarray(ref_scores, dtype=float).ravel()
    pw = np.ones(pos.size) if pos_weights is None else np.asarray(pos_weights, dtype=float).ravel()
    rw = np.ones(ref.size) if ref_weights is None else np.asarray(ref_weights, dtype=float).ravel()
    if pw.shape != pos.shape or rw.shape != ref.shape:
        raise ValueError("weights must match scores")
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(ref))):
        raise ValueError("scores must be finite")
    if np.any(pw < 0) or np.any(rw < 0):
        raise ValueError("weights must be nonnegative")
    tp_total, fp_total = pw.sum(), rw.sum()
    if pos.size == 0 or not tp_total > 0:
        raise ValueError("no positive mass: at least one positive is required")
    if ref.size == 0 or not fp_total > 0:
        raise ValueError("no reference mass: at least one negative/reference item is required")
    sign = 1.0 if direction == "high" else -1.0
    values = np.concatenate([pos, ref])
    uniq, inv = np.unique(sign * values, return_inverse=True)
    # descending order of the (signed) score
    inv = uniq.size - 1 - inv
    uniq = uniq[::-1]
    tp_mass = np.bincount(inv[: pos.size], weights=pw, minlength=uniq.size)
    fp_mass = np.bincount(inv[pos.size:], weights=rw, minlength=uniq.size)
    keep = (tp_mass > 0) | (fp_mass > 0)
    tp = np.cumsum(tp_mass[keep]) / tp_total
    fp = np.cumsum(fp_mass[keep]) / fp_total
    thr = sign * uniq[keep]
    p = np.clip(np.concatenate(([0.0], fp)), 0.0, 1.0)
    r = np.clip(np.concatenate(([0.0], tp)), 0.0, 1.0)
    p[-1] = r[-1] = 1.0
    t = np.concatenate(([np.nan], thr))
    return RocCurve(p, r, t, direction, fp_convention, provenance, dict(meta or {}))


def roc_binary(scores, labels, weights=None, fp_convention="absence", direction="high",
               fp_weights=None) -> RocCurve:
    """Empirical ROC of scores against binary labels.

    Parameters
    ----------
    scores : array_like
    labels : array_like of {0, 1}
    weights : array_like, optional
        Weights on the positives (true positive rate only).
    fp_convention : {"absence", "all", "area"}
        ``"absence"`` uses the negatives as reference; ``"all"``/``"area"``
        use every item.
    fp_weights : array_like, optional
        Weights on the reference items, e.g. cell areas or a baseline.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels must have equal length")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    w = np.ones(s.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    fw = np.ones(s.size) if fp_weights is None else np.asarray(fp_weights, dtype=float).ravel()
    if w.shape != s.shape or fw.shape != s.shape:
        raise ValueError("weights must match scores")
    pos = y == 1
    if not np.any(pos):
        raise ValueError("no positives")
    if fp_convention == "absence":
        ref = ~pos
        if not np.any(ref):
            raise ValueError("no negatives under the absence-only convention")
    elif fp_convention in ("all", "area"):
        ref = np.ones(s.size, dtype=bool)
    else:
        raise ValueError(f"fp_convention must be one of {FP_CONVENTIONS}")
    meta = {"n_positive": int(pos.sum()), "n_reference": int(ref.sum())}
    return curve_from_masses(s[pos], w[pos], s[ref], fw[ref], direction, fp_convention, meta=meta)


def roc_covariate_grid(grid: PresenceGrid, Z: Raster, direction="high", fp_convention="all",
                       baseline: Optional[Raster] = None) -> RocCurve:
    """Covariate ROC for a presence-absence grid.

    The true positive rate is the fraction of present cells with Z above the
    threshold. The false positive rate is the fraction of absent cells
    (``"absence"``) or of all known cells (``"all"``), weighted by the cell
    baseline ``b_j`` when the grid carries weights or ``baseline`` is given.
    """
    if Z.grid != grid.grid:
        Z = _aligned(Z, grid.grid)
    z = Z.values.ravel()
    status = grid.status.ravel()
    known = status >= 0
    finite = np.isfinite(z)
    n_missing = int(np.count_nonzero(known & ~finite))
    use = known & finite
    b = np.ones(z.size)
    if grid.weights is not None:
        b = b * np.nan_to_num(grid.weights.ravel(), nan=0.0)
    if baseline is not None:
        bb = _aligned(baseline, grid.grid).values.ravel()
        if np.any(bb[use & np.isfinite(bb)] < 0):
            raise ValueError("baseline must be nonnegative")
        b = b * np.nan_to_num(bb, nan=0.0)
    pos = use & (status == 1)
    if not np.any(pos):
        raise ValueError("no present cells with a finite covariate")
    if fp_convention == "absence":
        ref = use & (status == 0)
        if not np.any(ref):
            raise ValueError("no absent cells under the absence-only convention")
    elif fp_convention in ("all", "area"):
        ref = use
    else:
        raise ValueError(f"fp_convention must be one of {FP_CONVENTIONS}")
    meta = {"n_present": int(pos.sum()), "n_reference": int(ref.sum()), "n_missing": n_missing}
    return curve_from_masses(z[pos], None, z[ref], b[ref] * grid.cell_area, direction,
                             fp_convention, meta=meta)


def _point_values(pp: PointPattern, Z: Raster):
    z = Z.lookup(pp.x, pp.y)
    ok = np.isfinite(z)
    return z, ok


def roc_covariate_pp(pp: PointPattern, Z: Raster, direction="high",
                     baseline: Optional[Raster] = None, use_weights=True) -> RocCurve:
    """Covariate ROC for a point pattern.

    TP(t) is the (weighted) fraction of data points with Z(x_i) >= t and FP(t)
    the fraction of window area, or of baseline mass, with Z >= t.
    """
    if pp.n == 0:
        raise ValueError("empty point pattern")
    z, ok = _point_values(pp, Z)
    if not np.any(ok):
        raise ValueError("covariate is missing at every data point")
    w = pp.point_weights() if use_weights else np.ones(pp.n)
    cells = window_cells(Z, pp.window, baseline)
    if cells.values.size == 0:
        raise ValueError("covariate has no finite values inside the window")
    meta = {"n_points": int(ok.sum()), "n_points_missing": int((~ok).sum()),
            "n_cells": int(cells.values.size), "n_cells_missing": cells.n_missing}
    return curve_from_masses(z[ok], w[ok], cells.values, cells.weights, direction, "area", meta=meta)


def roc_casecontrol(data, Z=None, direction="high", labels=None) -> RocCurve:
    """ROC treating cases as positives and controls as the reference sample.

    Parameters
    ----------
    data : PointPattern or array_like
        Marked pattern (mark 1 = case, 0 = control) or an array of per-point
        scores, in which case ``labels`` is required.
    Z : Raster or array_like, optional
        Covariate raster looked up at the points, or per-point scores. When
        omitted, ``data`` itself holds the scores.
    """
    if isinstance(data, PointPattern):
        if data.marks is None and labels is None:
            raise ValueError("case-control pattern needs marks")
        y = np.asarray(data.marks if labels is None else labels)
        if isinstance(Z, Raster):
            s = Z.lookup(data.x, data.y)
        elif Z is not None:
            s = np.asarray(Z, dtype=float)
        else:
            raise ValueError("a covariate raster or per-point scores are required")
        w = data.point_weights()
    else:
        s = np.asarray(data if Z is None else Z, dtype=float).ravel()
        if labels is None:
            raise ValueError("labels are required with plain scores")
        y = np.asarray(labels).ravel()
        w = np.ones(s.size)
    if s.shape != y.shape:
        raise ValueError("scores and labels must have equal length")
    ok = np.isfinite(s)
    cases, controls = ok & (y == 1), ok & (y == 0)
    if not np.any(cases) or not np.any(controls):
        raise ValueError("case-control data need at least one case and one control")
    meta = {"n_cases": int(cases.sum()), "n_controls": int(controls.sum()),
            "n_missing": int((~ok).sum())}
    return curve_from_masses(s[cases], w[cases], s[controls], None, direction, "absence", meta=meta)


# --------------------------------------------------------------------------
# summaries and algebra


def auc(curve: RocCurve) -> float:
    p, r = curve.p, curve.r
    return float(np.sum(np.diff(p) * (r[1:] + r[:-1])) / 2.0)


def youden(curve: RocCurve, one_sided=True) -> float:
    """Largest deviation from the diagonal.

    On a polyline ``r - p`` is linear between knots, so the extreme values are
    attained at knots.
    """
    d = curve.r - curve.p
    if one_sided:
        return float(max(np.max(d), 0.0))
    return float(np.max(np.abs(d)))


def gini(curve: RocCurve) -> float:
    return 2.0 * auc(curve) - 1.0


def summarize(curve: RocCurve) -> RocSummary:
    return RocSummary(auc(curve), youden(curve, True), youden(curve, False), gini(curve))


def reverse(curve: RocCurve) -> RocCurve:
    """Reversed curve ``p -> 1 - R(1 - p)`` with the opposite direction."""
    t = None if curve.thresholds is None else curve.thresholds[::-1]
    return RocCurve(1.0 - curve.p[::-1], 1.0 - curve.r[::-1], t,
                    "low" if curve.direction == "high" else "high",
                    curve.fp_convention, curve.provenance, dict(curve.meta))


def evaluate(curve: RocCurve, p):
    """Left-continuous evaluation of the knot polyline.

    At a p-value shared by a vertical run of knots the lowest knot is
    returned; elsewhere values are interpolated linearly.
    """
    q = np.asarray(p, dtype=float)
    if np.any((q < 0) | (q > 1)):
        raise ValueError("p must lie in [0, 1]")
    P, R = curve.p, curve.r
    k = np.searchsorted(P, q, side="left")
    k = np.clip(k, 0, P.size - 1)
    hit = P[k] == q
    km = np.maximum(k - 1, 0)
    span = P[k] - P[km]
    frac = np.where(span > 0, (q - P[km]) / np.where(span > 0, span, 1.0), 1.0)
    out = np.where(hit, R[k], R[km] + frac * (R[k] - R[km]))
    return float(out) if np.ndim(out) == 0 else out


def p_grid(n=201) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


def curve_from_function(func, n=1001, provenance="theoretical", direction="high",
                        fp_convention="area") -> RocCurve:
    """Polyline through ``(p, func(p))`` on a uniform grid; func must be monotone."""
    p = np.linspace(0.0, 1.0, n)
    r = np.clip(np.maximum.accumulate(np.asarray(func(p), dtype=float)), 0.0, 1.0)
    r[0], r[-1] = 0.0, 1.0
    return RocCurve(p, r, None, direction, fp_convention, provenance)


# --------------------------------------------------------------------------
# serialisation


def _r12(x) -> float:
    return float(f"{float(x):.12g}")


def round_curve(curve: RocCurve) -> RocCurve:
    """Curve with knots and thresholds rounded to 12 significant digits."""
    f = np.vectorize(_r12, otypes=[float])
    t = None
    if curve.thresholds is not None:
        t = np.where(np.isfinite(curve.thresholds), f(np.nan_to_num(curve.thresholds)), np.nan)
    return RocCurve(f(curve.p), f(curve.r), t, curve.direction, curve.fp_convention,
                    curve.provenance, dict(curve.meta))


def curve_to_dict(curve: RocCurve) -> dict:
    c = round_curve(curve)
    if c.thresholds is None:
        knots = [[float(a), float(b)] for a, b in zip(c.p, c.r)]
    else:
        knots = [[float(a), float(b), None if not np.isfinite(t) else float(t)]
                 for a, b, t in zip(c.p, c.r, c.thresholds)]
    s = summarize(c)
    return {
        "direction": c.direction,
        "fp_convention": c.fp_convention,
        "provenance": c.provenance,
        "knots": knots,
        "summary": {k: _r12(v) for k, v in s.as_dict().items()},
        "meta": c.meta,
    }


def curve_from_dict(d: dict) -> RocCurve:
    knots = d["knots"]
    p = [k[0] for k in knots]
    r = [k[1] for k in knots]
    t = None
    if knots and len(knots[0]) > 2:
        t = [np.nan if k[2] is None else k[2] for k in knots]
    return RocCurve(p, r, t, d.get("direction", "high"), d.get("fp_convention", "area"),
                    d.get("provenance", "empirical"), dict(d.get("meta", {})))


def curve_to_json(curve: RocCurve) -> str:
    return json.dumps(curve_to_dict(curve), indent=2, sort_keys=True)


def curve_from_json(text: str) -> RocCurve:
    return curve_from_dict(json.loads(text))


def curve_to_csv(curve: RocCurve) -> str:
    c = round_curve(curve)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "r", "t"])
    t = c.thresholds if c.thresholds is not None else np.full(c.p.size, np.nan)
    for a, b, tt in zip(c.p, c.r, t):
        w.writerow([repr(float(a)), repr(float(b)), "" if not np.isfinite(tt) else repr(float(tt))])
    return buf.getvalue()
