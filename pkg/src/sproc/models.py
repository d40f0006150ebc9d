"""Logistic and loglinear Poisson models, leave-one-out refits and simulation.

Both models are fitted by Newton-Raphson on the exact log-likelihood, with
step halving. For the Poisson point process the likelihood uses one
quadrature node per raster cell, which makes it the piecewise-constant
likelihood ``sum_c n_c eta_c - a_c exp(eta_c)`` over cell counts ``n_c`` and
cell areas ``a_c``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from .spatial import (Grid, PointPattern, PresenceGrid, ProbabilityGrid, Raster, Window,
                      _aligned, cell_counts)


class FitError(RuntimeError):
    """Model fitting failed numerically."""


class SeparationWarning(UserWarning):
    """Fitted probabilities are numerically 0 or 1 (perfect separation)."""


Covariates = Union[Mapping[str, Raster], Sequence[Raster]]


def _named(covariates: Covariates, names=None) -> Dict[str, Raster]:
    if isinstance(covariates, Raster):
        covariates = [covariates]
    if isinstance(covariates, Mapping):
        return dict(covariates)
    covariates = list(covariates)
    if names is None:
        names = [f"z{k + 1}" for k in range(len(covariates))]
    if len(names) != len(covariates):
        raise ValueError("one name per covariate is required")
    return dict(zip(names, covariates))


# --------------------------------------------------------------------------
# Newton solver for the two canonical-link GLMs


@dataclass
class _Fit:
    beta: np.ndarray
    cov: np.ndarray
    iterations: int
    converged: bool
    loglik: float


def _loglik(family, eta, y, w, a):
    if family == "logistic":
        return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))
    return float(np.sum(y * eta - a * np.exp(eta)))


def _newton(family, X, y, off, w=None, a=None, beta0=None, tol=1e-8, max_iter=100) -> _Fit:
    """Maximise a logistic (weights ``w``) or Poisson (exposures ``a``) likelihood."""
    n, k = X.shape
    w = np.ones(n) if w is None else w
    a = np.ones(n) if a is None else a
    beta = np.zeros(k) if beta0 is None else np.array(beta0, dtype=float)
    eta = X @ beta + off
    ll = _loglik(family, eta, y, w, a)
    converged = False
    it = 0
    H = None
    for it in range(1, max_iter + 1):
        if family == "logistic":
            mu = expit(eta)
            grad = X.T @ (w * (y - mu))
            h = w * mu * (1.0 - mu)
        else:
            mu = a * np.exp(eta)
            grad = X.T @ (y - mu)
            h = mu
        H = (X * h[:, None]).T @ X
        try:
            step = np.linalg.solve(H + 1e-300 * np.eye(k), grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            raise FitError("non-finite Newton step")
        t = 1.0
        for _ in range(60):
            cand = beta + t * step
            eta_c = X @ cand + off
            ll_c = _loglik(family, eta_c, y, w, a)
            if np.isfinite(ll_c) and ll_c >= ll - 1e-10 * (1 + abs(ll)):
                break
            t *= 0.5
        else:
            raise FitError("likelihood could not be improved (divergent fit)")
        delta = cand - beta
        beta, eta, ll = cand, eta_c, ll_c
        if np.max(np.abs(delta)) < tol:
            converged = True
            break
    if family == "logistic":
        mu = expit(eta)
        h = w * mu * (1.0 - mu)
    else:
        h = a * np.exp(eta)
    H = (X * h[:, None]).T @ X
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        cov = np.full((k, k), np.nan)
    return _Fit(beta, cov, it, converged, ll)


def _check_design(X, names):
    """Drop identically-zero columns; raise on any other rank deficiency."""
    zero = np.all(X == 0, axis=0)
    zero[0] = False
    keep = ~zero
    Xk = X[:, keep]
    if np.linalg.matrix_rank(Xk) < Xk.shape[1]:
        raise FitError("singular design matrix (collinear covariates)")
    aliased = [nm for nm, z in zip(names, zero[1:]) if z]
    return keep, aliased


def _expand(beta_k, keep, fill=0.0):
    full = np.full(keep.size, fill)
    full[keep] = beta_k
    return full


# --------------------------------------------------------------------------
# logistic regression


@dataclass(frozen=True, eq=False)
class LogisticModel:
    """Fitted logistic regression ``logit(pi) = offset + beta . (1, z)``.

    For grid fits the offset is ``log(cell area)`` and ``fitted`` is a
    ProbabilityGrid; for case-control fits there is no offset and ``fitted``
    holds one probability per point.
    """

    coefficients: np.ndarray
    se: np.ndarray
    names: tuple
    offset: Optional[float]
    fitted: Union[ProbabilityGrid, np.ndarray]
    converged: bool
    iterations: int
    tol: float
    separated: bool = False
    aliased: tuple = ()
    kind: str = "grid"
    X: np.ndarray = field(default=None, repr=False)
    y: np.ndarray = field(default=None, repr=False)
    rows: np.ndarray = field(default=None, repr=False)
    covariates: Optional[dict] = field(default=None, repr=False)
    data: object = field(default=None, repr=False)
    max_iter: int = 100

    @property
    def coef(self) -> dict:
        return dict(zip(("(Intercept)",) + tuple(self.names), self.coefficients.tolist()))

    def linear_predictor(self, covariates: Optional[Covariates] = None, grid: Optional[Grid] = None):
        covs = self.covariates if covariates is None else _named(covariates, list(self.names))
        g = grid
        if g is None and covs:
            g = next(iter(covs.values())).grid
        if g is None and isinstance(self.data, PresenceGrid):
            g = self.data.grid
        if g is None:
            raise ValueError("a grid is needed to predict an intercept-only model")
        eta = np.full(g.shape, self.coefficients[0] + (self.offset or 0.0))
        for b, nm in zip(self.coefficients[1:], self.names):
            eta = eta + b * _aligned(covs[nm], g).values
        return Raster(g, eta)

    def predict(self, covariates: Optional[Covariates] = None, grid: Optional[Grid] = None) -> Raster:
        """Presence probability on a grid."""
        return self.linear_predictor(covariates, grid).map(expit)


def _logistic_fit(X, y, off, names, tol, max_iter):
    keep, aliased = _check_design(X, names)
    Xk = X[:, keep]
    ybar = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    beta0 = np.zeros(Xk.shape[1])
    beta0[0] = np.log(ybar / (1 - ybar)) - float(np.mean(off))
    fit = _newton("logistic", Xk, y, off, beta0=beta0, tol=tol, max_iter=max_iter)
    mu = expit(Xk @ fit.beta + off)
    separated = bool((not fit.converged and np.max(np.abs(fit.beta)) > 10)
                     or np.max(np.abs(y - mu)) < 1e-8)
    if separated:
        warnings.warn("perfect or quasi-complete separation: fitted probabilities reach 0 or 1",
                      SeparationWarning, stacklevel=3)
    se = np.sqrt(np.clip(np.diag(fit.cov), 0, None))
    return fit, keep, aliased, separated, _expand(fit.beta, keep), _expand(se, keep, np.nan), mu


def fit_logistic(grid: PresenceGrid, covariates: Covariates, offset: Union[bool, float] = True,
                 names=None, tol=1e-8, max_iter=100) -> LogisticModel:
    """Logistic regression of presence on covariates over the known cells.

    Parameters
    ----------
    grid : PresenceGrid
    covariates : dict or list of Raster
        Resampled to the presence grid by nearest cell if necessary.
    offset : bool or float
        ``True`` uses ``log(cell area)``; a float is used as is; ``False``
        fits without offset.
    """
    covs = _named(covariates, names)
    covs = {k: _aligned(v, grid.grid) for k, v in covs.items()}
    names = tuple(covs)
    status = grid.status.ravel()
    known = status >= 0
    cols = [np.ones(status.size)] + [c.values.ravel() for c in covs.values()]
    X_all = np.column_stack(cols)
    finite = np.all(np.isfinite(X_all), axis=1)
    rows = np.flatnonzero(known & finite)
    y = status[rows].astype(float)
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValueError("logistic fit needs at least one present and one absent cell")
    off_val = np.log(grid.cell_area) if offset is True else (0.0 if offset is False else float(offset))
    X = X_all[rows]
    off = np.full(rows.size, off_val)
    fit, keep, aliased, separated, beta, se, mu = _logistic_fit(X, y, off, names, tol, max_iter)
    vals = np.full(status.size, np.nan)
    vals[rows] = mu
    return LogisticModel(beta, se, names, off_val if offset is not False else None,
                         ProbabilityGrid(grid.grid, vals.reshape(grid.grid.shape)),
                         fit.converged, fit.iterations, tol, separated, tuple(aliased), "grid",
                         X, y, rows, covs, grid, max_iter)


def fit_logistic_casecontrol(points: PointPattern, covariates, names=None, tol=1e-8,
                             max_iter=100) -> LogisticModel:
    """Logistic regression of the case mark on per-point covariate values.

    ``covariates`` is a dict or list of Rasters (looked up at the points) or of
    per-point value arrays.
    """
    if points.marks is None:
        raise ValueError("case-control pattern needs marks")
    if isinstance(covariates, (Raster, np.ndarray)) and not isinstance(covariates, Mapping):
        covariates = [covariates]
    if isinstance(covariates, Mapping):
        items = dict(covariates)
    else:
        covariates = list(covariates)
        nm = names or [f"z{k + 1}" for k in range(len(covariates))]
        items = dict(zip(nm, covariates))
    names = tuple(items)
    cols = [np.ones(points.n)]
    rasters = {}
    for k, v in items.items():
        if isinstance(v, Raster):
            rasters[k] = v
            cols.append(v.lookup(points.x, points.y))
        else:
            arr = np.asarray(v, dtype=float)
            if arr.shape != (points.n,):
                raise ValueError(f"covariate {k!r} must have one value per point")
            cols.append(arr)
    X_all = np.column_stack(cols)
    rows = np.flatnonzero(np.all(np.isfinite(X_all), axis=1))
    y = (np.asarray(points.marks)[rows] == 1).astype(float)
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValueError("case-control fit needs both cases and controls")
    X = X_all[rows]
    off = np.zeros(rows.size)
    fit, keep, aliased, separated, beta, se, mu = _logistic_fit(X, y, off, names, tol, max_iter)
    vals = np.full(points.n, np.nan)
    vals[rows] = mu
    return LogisticModel(beta, se, names, None, vals, fit.converged, fit.iterations, tol,
                         separated, tuple(aliased), "casecontrol", X, y, rows,
                         rasters if len(rasters) == len(items) else None, points, max_iter)


# --------------------------------------------------------------------------
# loglinear Poisson point process


@dataclass(frozen=True, eq=False)
class PoissonPPModel:
    """Fitted loglinear intensity ``lambda(u) = exp(beta . (1, Z(u)))``."""

    coefficients: np.ndarray
    se: np.ndarray
    names: tuple
    intensity: Raster
    converged: bool
    iterations: int
    tol: float
    aliased: tuple = ()
    quadrature: str = "one node per raster cell, weight = cell area"
    X: np.ndarray = field(default=None, repr=False)
    counts: np.ndarray = field(default=None, repr=False)
    areas: np.ndarray = field(default=None, repr=False)
    cells: np.ndarray = field(default=None, repr=False)
    point_cell: np.ndarray = field(default=None, repr=False)
    covariates: Optional[dict] = field(default=None, repr=False)
    data: Optional[PointPattern] = field(default=None, repr=False)
    max_iter: int = 100

    @property
    def coef(self) -> dict:
        return dict(zip(("(Intercept)",) + tuple(self.names), self.coefficients.tolist()))

    def predict(self, covariates: Optional[Covariates] = None, grid: Optional[Grid] = None) -> Raster:
        covs = self.covariates if covariates is None else _named(covariates, list(self.names))
        g = grid or self.intensity.grid
        eta = np.full(g.shape, self.coefficients[0])
        for b, nm in zip(self.coefficients[1:], self.names):
            eta = eta + b * _aligned(covs[nm], g).values
        return Raster(g, np.exp(eta))

    def expected_count(self) -> float:
        return float(np.sum(self.areas * np.exp(self.X @ self.coefficients)))


def fit_poisson_loglinear(pp: PointPattern, covariates: Covariates = (), names=None,
                          grid: Optional[Grid] = None, tol=1e-8, max_iter=100) -> PoissonPPModel:
    """Maximum likelihood fit of a loglinear Poisson intensity.

    Parameters
    ----------
    pp : PointPattern
    covariates : dict or list of Raster
        May be empty for a homogeneous fit, in which case ``grid`` gives the
        quadrature cells.
    """
    if pp.n == 0:
        raise ValueError("cannot fit a Poisson model to an empty pattern")
    covs = _named(covariates, names)
    if grid is None:
        if not covs:
            raise ValueError("a grid is required when there are no covariates")
        grid = next(iter(covs.values())).grid
    covs = {k: _aligned(v, grid) for k, v in covs.items()}
    names = tuple(covs)
    inside = pp.window.cell_mask(grid).ravel()
    cols = [np.ones(grid.nrow * grid.ncol)] + [c.values.ravel() for c in covs.values()]
    X_all = np.column_stack(cols)
    ok = inside & np.all(np.isfinite(X_all), axis=1)
    cells = np.flatnonzero(ok)
    if cells.size == 0:
        raise ValueError("no quadrature cells with finite covariates inside the window")
    counts_all = cell_counts(pp, grid).ravel()
    point_flat = grid.flat_index(pp.x, pp.y)
    pos = np.full(counts_all.size, -1)
    pos[cells] = np.arange(cells.size)
    point_cell = np.where(point_flat >= 0, pos[np.maximum(point_flat, 0)], -1)
    y = counts_all[cells].astype(float)
    if y.sum() == 0:
        raise ValueError("no data points fall in cells with finite covariates")
    X = X_all[cells]
    a = np.full(cells.size, grid.cell_area)
    keep, aliased = _check_design(X, names)
    Xk = X[:, keep]
    beta0 = np.zeros(Xk.shape[1])
    beta0[0] = np.log(y.sum() / a.sum())
    fit = _newton("poisson", Xk, y, np.zeros(cells.size), a=a, beta0=beta0, tol=tol, max_iter=max_iter)
    if not np.all(np.isfinite(fit.beta)):
        raise FitError("Poisson fit diverged")
    beta = _expand(fit.beta, keep)
    se = _expand(np.sqrt(np.clip(np.diag(fit.cov), 0, None)), keep, np.nan)
    lam = np.full(X_all.shape[0], np.nan)
    finite = np.all(np.isfinite(X_all), axis=1)
    lam[finite] = np.exp(X_all[finite] @ beta)
    return PoissonPPModel(beta, se, names, Raster(grid, lam.reshape(grid.shape)), fit.converged,
                          fit.iterations, tol, tuple(aliased), X=X, counts=y, areas=a, cells=cells,
                          point_cell=point_cell, covariates=covs, data=pp, max_iter=max_iter)


# --------------------------------------------------------------------------
# leave-one-out


def _loo_logistic(model: LogisticModel, j: int) -> float:
    """Leave out row ``j`` of the design (index into ``model.rows``)."""
    keep = np.array([True] + [nm not in model.aliased for nm in model.names], dtype=bool)
    X = model.X[:, keep]
    w = np.ones(X.shape[0])
    w[j] = 0.0
    off = np.full(X.shape[0], model.offset or 0.0)
    y_rest = np.delete(model.y, j)
    if not (np.any(y_rest == 1) and np.any(y_rest == 0)):
        raise FitError(f"leave-one-out refit at index {j}: a single class remains")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SeparationWarning)
            fit = _newton("logistic", X, model.y, off, w=w, beta0=model.coefficients[keep],
                          tol=model.tol, max_iter=model.max_iter)
    except FitError as exc:
        raise FitError(f"leave-one-out refit at index {j}: {exc}") from exc
    return float(expit(X[j] @ fit.beta + off[j]))


def _loo_poisson(model: PoissonPPModel, c: int) -> float:
    """Leave out one point from quadrature cell ``c``; weights are unchanged."""
    keep = np.array([True] + [nm not in model.aliased for nm in model.names], dtype=bool)
    X = model.X[:, keep]
    y = model.counts.copy()
    if y[c] < 1:
        raise ValueError("no data point in this cell")
    y[c] -= 1
    if y.sum() == 0:
        raise FitError(f"leave-one-out refit at cell {c}: no points remain")
    try:
        fit = _newton("poisson", X, y, np.zeros(y.size), a=model.areas,
                      beta0=model.coefficients[keep], tol=model.tol, max_iter=model.max_iter)
    except FitError as exc:
        raise FitError(f"leave-one-out refit at cell {c}: {exc}") from exc
    return float(np.exp(X[c] @ fit.beta))


def loo_fitted(model, index: int) -> float:
    """Leave-one-out fitted value.

    For a LogisticModel ``index`` is a flat cell index (grid fit) or a point
    index (case-control fit); the model is refitted without that datum and the
    probability predicted there. For a PoissonPPModel ``index`` is a point
    index and the intensity at that point is predicted from the refit.
    """
    if isinstance(model, LogisticModel):
        pos = np.flatnonzero(model.rows == index)
        if pos.size == 0:
            raise IndexError(f"datum {index} was not used in the fit")
        return _loo_logistic(model, int(pos[0]))
    if isinstance(model, PoissonPPModel):
        c = int(model.point_cell[index])
        if c < 0:
            raise IndexError(f"point {index} was not used in the fit")
        return _loo_poisson(model, c)
    raise TypeError("unsupported model type")


def loo_all(model) -> np.ndarray:
    """Leave-one-out fitted values for every datum used in the fit.

    Returns an array over the grid cells (NaN where unused), over the
    case-control points, or over the data points of a Poisson model.
    Identical data rows share one refit.
    """
    if isinstance(model, LogisticModel):
        key = np.column_stack([model.X, model.y])
        _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
        vals = np.array([_loo_logistic(model, int(j)) for j in first])[inv.ravel()]
        size = model.fitted.values.size if model.kind == "grid" else model.fitted.size
        out = np.full(size, np.nan)
        out[model.rows] = vals
        return out.reshape(model.fitted.values.shape) if model.kind == "grid" else out
    if isinstance(model, PoissonPPModel):
        out = np.full(model.point_cell.size, np.nan)
        cache = {}
        for i, c in enumerate(model.point_cell):
            if c < 0:
                continue
            if c not in cache:
                cache[c] = _loo_poisson(model, int(c))
            out[i] = cache[c]
        return out
    raise TypeError("unsupported model type")


# --------------------------------------------------------------------------
# simulation


def simulate_poisson(intensity: Raster, W: Window, seed=None) -> PointPattern:
    """Poisson process with piecewise-constant intensity on the cells inside W.

    Each cell receives a Poisson count with mean ``lambda * area`` and its
    points are uniform within the part of the cell inside W's rectangle.
    """
    rng = np.random.default_rng(seed)
    g = intensity.grid
    lam = intensity.values
    inside = W.cell_mask(g) & np.isfinite(lam)
    if np.any(lam[inside] < 0):
        raise ValueError("intensity must be nonnegative")
    rows, cols = np.nonzero(inside)
    x0 = np.maximum(g.x0 + cols * g.dx, W.xmin)
    x1 = np.minimum(g.x0 + (cols + 1) * g.dx, W.xmax)
    y0 = np.maximum(g.y0 + rows * g.dy, W.ymin)
    y1 = np.minimum(g.y0 + (rows + 1) * g.dy, W.ymax)
    area = np.clip(x1 - x0, 0, None) * np.clip(y1 - y0, 0, None)
    mu = lam[rows, cols] * area
    if not np.isfinite(mu.sum()):
        raise ValueError("intensity has an infinite integral")
    n = rng.poisson(mu)
    idx = np.repeat(np.arange(n.size), n)
    x = x0[idx] + rng.random(idx.size) * (x1 - x0)[idx]
    y = y0[idx] + rng.random(idx.size) * (y1 - y0)[idx]
    return PointPattern(x, y, W)


def simulate_logistic(prob: ProbabilityGrid, seed=None) -> PresenceGrid:
    """Independent Bernoulli presence per known cell."""
    rng = np.random.default_rng(seed)
    v = prob.values
    known = np.isfinite(v)
    status = np.full(v.shape, -1, dtype=int)
    status[known] = (rng.random(np.count_nonzero(known)) < v[known]).astype(int)
    return PresenceGrid(prob.grid, status)


# --------------------------------------------------------------------------
# serialisation


def model_to_dict(model, covariate_paths: Optional[Mapping[str, str]] = None) -> dict:
    kind = "logistic" if isinstance(model, LogisticModel) else "poisson"
    coef = {k: float(f"{v:.12g}") for k, v in model.coef.items()}
    d = {
        "type": kind,
        "coefficients": coef,
        "covariates": {nm: (covariate_paths or {}).get(nm) for nm in model.names},
        "offset": getattr(model, "offset", None),
        "convergence": {"iters": int(model.iterations), "tol": model.tol,
                        "converged": bool(model.converged)},
    }
    return d
