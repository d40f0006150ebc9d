"""Windows, rasters, point patterns and the spatial CDF.

Every area integral in the package is a sum over raster cells,
``integral_W f(u) du ~= sum_cells f(centre) * dx * dy``, and a covariate is
looked up at a data point as the value of the cell containing the point.
A cell belongs to a window when its centre does.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Grid:
    """Regular grid geometry. Row 0 is the bottom (smallest y) row."""

    x0: float
    y0: float
    dx: float
    dy: float
    nrow: int
    ncol: int

    def __post_init__(self):
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("cell size must be positive")
        if self.nrow < 1 or self.ncol < 1:
            raise ValueError("grid must have at least one cell")

    @classmethod
    def covering(cls, xmin, xmax, ymin, ymax, ncol, nrow=None) -> "Grid":
        nrow = ncol if nrow is None else nrow
        return cls(xmin, ymin, (xmax - xmin) / ncol, (ymax - ymin) / nrow, nrow, ncol)

    @property
    def shape(self):
        return (self.nrow, self.ncol)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def xmax(self) -> float:
        return self.x0 + self.ncol * self.dx

    @property
    def ymax(self) -> float:
        return self.y0 + self.nrow * self.dy

    def x_centers(self) -> np.ndarray:
        return self.x0 + (np.arange(self.ncol) + 0.5) * self.dx

    def y_centers(self) -> np.ndarray:
        return self.y0 + (np.arange(self.nrow) + 0.5) * self.dy

    def centers(self):
        """Return (X, Y) arrays of cell centres, each of shape (nrow, ncol)."""
        return np.meshgrid(self.x_centers(), self.y_centers())

    def cell_index(self, x, y):
        """Row and column of the cell containing each point, -1 if outside.

        Cells are half-open ``[x0 + k dx, x0 + (k+1) dx)``; the outer right and
        top edges of the grid are closed so that points on the boundary of a
        window coinciding with the grid are not lost.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        col = np.floor((x - self.x0) / self.dx).astype(int)
        row = np.floor((y - self.y0) / self.dy).astype(int)
        col = np.where((col == self.ncol) & np.isclose(x, self.xmax), self.ncol - 1, col)
        row = np.where((row == self.nrow) & np.isclose(y, self.ymax), self.nrow - 1, row)
        bad = (col < 0) | (col >= self.ncol) | (row < 0) | (row >= self.nrow)
        return np.where(bad, -1, row), np.where(bad, -1, col)

    def flat_index(self, x, y) -> np.ndarray:
        row, col = self.cell_index(x, y)
        return np.where(row < 0, -1, row * self.ncol + col)

    def covers(self, xmin, xmax, ymin, ymax, tol=1e-9) -> bool:
        return (self.x0 <= xmin + tol and self.xmax >= xmax - tol
                and self.y0 <= ymin + tol and self.ymax >= ymax - tol)


@dataclass(frozen=True)
class Raster:
    """Piecewise-constant field on a grid; NaN marks missing cells."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Raster":
        X, Y = grid.centers()
        return cls(grid, np.broadcast_to(func(X, Y), grid.shape).astype(float))

    def lookup(self, x, y) -> np.ndarray:
        """Value of the cell containing each point (NaN outside the grid)."""
        idx = self.grid.flat_index(x, y)
        flat = self.values.ravel()
        out = np.full(idx.shape, np.nan)
        ok = idx >= 0
        out[ok] = flat[idx[ok]]
        return out

    def map(self, func) -> "Raster":
        return Raster(self.grid, func(self.values))

    def with_values(self, values) -> "Raster":
        return Raster(self.grid, values)

    def bounding_window(self) -> "Window":
        g = self.grid
        return Window(g.x0, g.xmax, g.y0, g.ymax)


@dataclass(frozen=True)
class Window:
    """Rectangle with an optional inclusion mask (boolean raster)."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    mask: Optional[Raster] = None

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("window must have xmax > xmin and ymax > ymin")
        if self.mask is not None:
            m = np.nan_to_num(self.mask.values, nan=0.0) != 0
            object.__setattr__(self, "mask", Raster(self.mask.grid, m.astype(float)))
            if self.area() <= 0:
                raise ValueError("window mask selects no cells")

    @classmethod
    def unit_square(cls) -> "Window":
        return cls(0.0, 1.0, 0.0, 1.0)

    def contains(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)
        if self.mask is not None:
            m = self.mask.lookup(x, y)
            inside &= np.nan_to_num(m, nan=0.0) > 0
        return inside

    def cell_mask(self, grid: Grid) -> np.ndarray:
        """Boolean (nrow, ncol) array: cells of ``grid`` whose centre is inside."""
        X, Y = grid.centers()
        return self.contains(X, Y)

    def area(self) -> float:
        if self.mask is None:
            return (self.xmax - self.xmin) * (self.ymax - self.ymin)
        g = self.mask.grid
        X, Y = g.centers()
        rect = (X >= self.xmin) & (X <= self.xmax) & (Y >= self.ymin) & (Y <= self.ymax)
        return float(np.count_nonzero(rect & (self.mask.values > 0)) * g.cell_area)

    def bbox(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)


@dataclass(frozen=True)
class PointPattern:
    """Finite point pattern with optional binary marks and nonnegative weights."""

    x: np.ndarray
    y: np.ndarray
    window: Window
    marks: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-d arrays of equal length")
        if x.size and not np.all(self.window.contains(x, y)):
            raise ValueError("all points must lie inside the window")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        if self.marks is not None:
            m = np.asarray(self.marks)
            if m.shape != x.shape:
                raise ValueError("marks must have one entry per point")
            object.__setattr__(self, "marks", _frozen(m, dtype=int))
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != x.shape:
                raise ValueError("weights must have one entry per point")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and nonnegative")
            object.__setattr__(self, "weights", _frozen(w))

    @property
    def n(self) -> int:
        return int(self.x.size)

    def __len__(self):
        return self.n

    def point_weights(self) -> np.ndarray:
        return np.ones(self.n) if self.weights is None else np.asarray(self.weights)

    def subset(self, keep) -> "PointPattern":
        keep = np.asarray(keep)
        return PointPattern(
            self.x[keep], self.y[keep], self.window,
            None if self.marks is None else self.marks[keep],
            None if self.weights is None else self.weights[keep],
        )

    def with_weights(self, weights) -> "PointPattern":
        return replace(self, weights=weights)


UNKNOWN = -1


@dataclass(frozen=True)
class PresenceGrid:
    """Per-cell presence status: 1 present, 0 absent, -1 unknown.

    ``weights`` are optional per-cell baseline weights b_j used by the
    false positive rate.
    """

    grid: Grid
    status: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        s = np.asarray(self.status).astype(np.int8)
        if s.shape != self.grid.shape:
            raise ValueError("status shape does not match grid")
        if not np.all(np.isin(s, (UNKNOWN, 0, 1))):
            raise ValueError("status must be 1, 0 or -1 (unknown)")
        if not np.any(s >= 0):
            raise ValueError("presence grid has no known cells")
        object.__setattr__(self, "status", _frozen(s, dtype=np.int8))
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != self.grid.shape:
                raise ValueError("weights shape does not match grid")
            if np.any(w[s >= 0] < 0):
                raise ValueError("baseline weights must be nonnegative")
            object.__setattr__(self, "weights", _frozen(w))

    @property
    def cell_area(self) -> float:
        return self.grid.cell_area

    @property
    def known(self) -> np.ndarray:
        return self.status >= 0

    @property
    def n_present(self) -> int:
        return int(np.count_nonzero(self.status == 1))

    @property
    def n_absent(self) -> int:
        return int(np.count_nonzero(self.status == 0))


@dataclass(frozen=True)
class ProbabilityGrid:
    """Presence probabilities per cell; NaN where unknown."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError("values shape does not match grid")
        ok = np.isfinite(v)
        if np.any((v[ok] < 0) | (v[ok] > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.sum(v[ok]) > 0:
            raise ValueError("probabilities must have a positive sum")
        object.__setattr__(self, "values", _frozen(v))

    def as_raster(self) -> Raster:
        return Raster(self.grid, self.values)


@dataclass(frozen=True)
class StepCdf:
    """Right-continuous step distribution function.

    ``values[k]`` is F(breakpoints[k]); F is 0 below the first breakpoint and
    the last value is 1.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1 or t.size == 0:
            raise ValueError("breakpoints and values must be equal-length 1-d arrays")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(v) < 0) or v[0] < 0 or abs(v[-1] - 1) > 1e-9:
            raise ValueError("values must be nondecreasing and end at 1")
        v = v.copy()
        v[-1] = 1.0
        object.__setattr__(self, "breakpoints", _frozen(t))
        object.__setattr__(self, "values", _frozen(v))

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        k = np.searchsorted(self.breakpoints, z, side="right")
        padded = np.concatenate(([0.0], self.values))
        return padded[k]

    def left(self, z) -> np.ndarray:
        """F(z-), the mass strictly below z."""
        z = np.asarray(z, dtype=float)
        k = np.searchsorted(self.breakpoints, z, side="left")
        padded = np.concatenate(([0.0], self.values))
        return padded[k]

    def mid(self, z) -> np.ndarray:
        """Mid-distribution transform F(z-) + (F(z) - F(z-)) / 2."""
        return 0.5 * (self(z) + self.left(z))

    def quantile(self, q) -> np.ndarray:
        """Right-continuous inverse, inf{z : F(z) >= q}."""
        q = np.asarray(q, dtype=float)
        k = np.searchsorted(self.values, q - 1e-15, side="left")
        k = np.clip(k, 0, self.breakpoints.size - 1)
        return self.breakpoints[k]

    @property
    def masses(self) -> np.ndarray:
        return np.diff(np.concatenate(([0.0], self.values)))


# --------------------------------------------------------------------------
# cell-level views used by the estimators


@dataclass(frozen=True)
class CellSample:
    """Covariate values and area weights of the cells inside a window."""

    values: np.ndarray
    weights: np.ndarray
    flat_index: np.ndarray
    n_missing: int = 0


def window_cells(Z: Raster, W: Window, baseline: Optional[Raster] = None) -> CellSample:
    """Cells of ``Z`` inside ``W`` with finite values, weighted by area x baseline."""
    inside = W.cell_mask(Z.grid).ravel()
    z = Z.values.ravel()
    w = np.full(z.shape, Z.grid.cell_area)
    if baseline is not None:
        b = _aligned(baseline, Z.grid).values.ravel()
        if np.any(b[inside & np.isfinite(b)] < 0):
            raise ValueError("baseline must be nonnegative")
        inside_b = inside & np.isfinite(b)
        w = w * np.where(np.isfinite(b), b, 0.0)
    else:
        inside_b = inside
    finite = np.isfinite(z)
    keep = inside_b & finite
    n_missing = int(np.count_nonzero(inside & ~finite))
    idx = np.flatnonzero(keep)
    return CellSample(z[idx], w[idx], idx, n_missing)


def _aligned(r: Raster, grid: Grid) -> Raster:
    """Resample ``r`` onto ``grid`` by nearest cell (identity if already aligned)."""
    if r.grid == grid:
        return r
    X, Y = grid.centers()
    return Raster(grid, r.lookup(X, Y))


def resample(r: Raster, grid: Grid) -> Raster:
    """Nearest-cell resampling of a raster onto another grid."""
    return _aligned(r, grid)


# --------------------------------------------------------------------------
# operations


def discretise(pp: PointPattern, grid: Grid) -> PresenceGrid:
    """Presence-absence grid from a point pattern.

    Cells whose centre lies inside the window are present if they contain at
    least one point and absent otherwise; cells outside the window are unknown.
    """
    W = pp.window
    if not grid.covers(*W.bbox()):
        raise ValueError("grid does not cover the window of the point pattern")
    inside = W.cell_mask(grid)
    counts = np.zeros(grid.nrow * grid.ncol, dtype=int)
    idx = grid.flat_index(pp.x, pp.y)
    np.add.at(counts, idx[idx >= 0], 1)
    status = np.where(counts.reshape(grid.shape) > 0, 1, 0)
    status = np.where(inside, status, UNKNOWN)
    return PresenceGrid(grid, status)


def cell_counts(pp: PointPattern, grid: Grid) -> np.ndarray:
    counts = np.zeros(grid.nrow * grid.ncol, dtype=int)
    idx = grid.flat_index(pp.x, pp.y)
    np.add.at(counts, idx[idx >= 0], 1)
    return counts.reshape(grid.shape)


def spatial_cdf(Z: Raster, W: Window, baseline: Optional[Raster] = None) -> StepCdf:
    """Distribution function of Z(U) for U uniform on W (or with density ~ baseline)."""
    cells = window_cells(Z, W, baseline)
    if cells.values.size == 0:
        raise ValueError("covariate has no finite values inside the window")
    return _step_cdf(cells.values, cells.weights)


def _step_cdf(values, weights) -> StepCdf:
    total = float(np.sum(weights))
    if not total > 0:
        raise ValueError("total baseline mass is zero")
    uniq, inv = np.unique(values, return_inverse=True)
    mass = np.bincount(inv, weights=weights, minlength=uniq.size)
    keep = mass > 0
    cum = np.cumsum(mass[keep]) / total
    return StepCdf(uniq[keep], cum)


def _segment_distance(px, py, ax, ay, bx, by):
    vx, vy = bx - ax, by - ay
    L2 = vx * vx + vy * vy
    if L2 == 0:
        return np.hypot(px - ax, py - ay)
    t = np.clip(((px - ax) * vx + (py - ay) * vy) / L2, 0.0, 1.0)
    return np.hypot(px - (ax + t * vx), py - (ay + t * vy))


def distance_transform(features, grid: Grid) -> Raster:
    """Euclidean distance from each cell centre to the nearest feature.

    ``features`` is a PointPattern, an (n, 2) array of points, or a sequence of
    line segments ``((x1, y1), (x2, y2))`` given as an (m, 2, 2) array.
    """
    X, Y = grid.centers()
    cx, cy = X.ravel(), Y.ravel()
    if isinstance(features, PointPattern):
        pts = np.column_stack([features.x, features.y])
        segs = None
    else:
        arr = np.asarray(features, dtype=float)
        if arr.ndim == 3 and arr.shape[1:] == (2, 2):
            pts, segs = None, arr
        elif arr.ndim == 2 and arr.shape[1] == 2:
            pts, segs = arr, None
        else:
            raise ValueError("features must be points (n, 2) or segments (m, 2, 2)")
    if (pts is not None and len(pts) == 0) or (segs is not None and len(segs) == 0):
        raise ValueError("feature set is empty")
    if pts is not None:
        from scipy.spatial import cKDTree

        d, _ = cKDTree(pts).query(np.column_stack([cx, cy]))
    else:
        d = np.full(cx.shape, np.inf)
        for (ax, ay), (bx, by) in segs:
            d = np.minimum(d, _segment_distance(cx, cy, ax, ay, bx, by))
    return Raster(grid, d.reshape(grid.shape))


RestrictTarget = Union[Window, Raster, PointPattern, PresenceGrid]


def _intersect_windows(A: Window, B: Window) -> Window:
    xmin, xmax = max(A.xmin, B.xmin), min(A.xmax, B.xmax)
    ymin, ymax = max(A.ymin, B.ymin), min(A.ymax, B.ymax)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("restriction region does not intersect the window")
    masks = [m for m in (A.mask, B.mask) if m is not None]
    mask = None
    if len(masks) == 1:
        mask = masks[0]
    elif len(masks) == 2:
        a, b = masks
        mask = Raster(a.grid, (a.values > 0) & (_aligned(b, a.grid).values > 0))
    try:
        return Window(xmin, xmax, ymin, ymax, mask)
    except ValueError as exc:
        raise ValueError("restriction region does not intersect the window") from exc


def restrict(obj: RestrictTarget, B: Window):
    """Restrict a window, raster, point pattern or presence grid to region B."""
    if isinstance(obj, Window):
        return _intersect_windows(obj, B)
    if isinstance(obj, Raster):
        inside = B.cell_mask(obj.grid)
        if not np.any(inside & np.isfinite(obj.values)):
            raise ValueError("restriction region contains no cells of the raster")
        return Raster(obj.grid, np.where(inside, obj.values, np.nan))
    if isinstance(obj, PointPattern):
        W = _intersect_windows(obj.window, B)
        keep = W.contains(obj.x, obj.y)
        return PointPattern(
            obj.x[keep], obj.y[keep], W,
            None if obj.marks is None else obj.marks[keep],
            None if obj.weights is None else obj.weights[keep],
        )
    if isinstance(obj, PresenceGrid):
        inside = B.cell_mask(obj.grid)
        status = np.where(inside, obj.status, UNKNOWN)
        if not np.any(status >= 0):
            raise ValueError("restriction region contains no known cells")
        return PresenceGrid(obj.grid, status, obj.weights)
    raise TypeError(f"cannot restrict object of type {type(obj).__name__}")


def window_from_raster(r: Raster, predicate=None, bbox: Optional[Sequence[float]] = None) -> Window:
    """Window whose mask is the set of cells where ``predicate(values)`` holds."""
    vals = r.values
    m = np.isfinite(vals) if predicate is None else (np.isfinite(vals) & predicate(np.nan_to_num(vals)))
    xmin, xmax, ymin, ymax = bbox if bbox is not None else (r.grid.x0, r.grid.xmax, r.grid.y0, r.grid.ymax)
    return Window(xmin, xmax, ymin, ymax, Raster(r.grid, m.astype(float)))
