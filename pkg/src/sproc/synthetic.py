"""Synthetic layouts used by the experiments and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .spatial import Grid, PointPattern, Raster, Window


@dataclass(frozen=True)
class Layout:
    """Window, covariate and true intensity on a common grid."""

    window: Window
    Z: Raster
    intensity: Raster
    direction: str = "high"


def corner(ncell=128, scale=100.0) -> Layout:
    """Unit square with intensity ``scale * x^2 * y`` and covariate x."""
    W = Window.unit_square()
    g = Grid.covering(0, 1, 0, 1, ncell)
    Z = Raster.from_function(g, lambda x, y: x)
    lam = Raster.from_function(g, lambda x, y: scale * x ** 2 * y)
    return Layout(W, Z, lam, "high")


def corner_auc_oracle() -> float:
    """``P(Z(X) > Z(U))`` for the corner layout by numerical quadrature.

    The point location has density proportional to ``x^2 y`` and U is uniform,
    so the probability is ``int int x * x^2 y dx dy / int int x^2 y dx dy``.
    """
    num, _ = integrate.dblquad(lambda y, x: x * x ** 2 * y, 0, 1, 0, 1)
    den, _ = integrate.dblquad(lambda y, x: x ** 2 * y, 0, 1, 0, 1)
    return num / den


def strip(dx=0.05, scale=100.0, half_width=10.0) -> Layout:
    """Strip ``[-10, 10] x [-1, 1]`` with intensity ``scale * 2^{-|x|}`` and covariate |x|.

    Small |x| favours presence, so the direction is ``"low"``.
    """
    W = Window(-half_width, half_width, -1.0, 1.0)
    g = Grid.covering(-half_width, half_width, -1.0, 1.0,
                      int(round(2 * half_width / dx)), int(round(2 / dx)))
    Z = Raster.from_function(g, lambda x, y: np.abs(x))
    lam = Raster.from_function(g, lambda x, y: scale * 2.0 ** (-np.abs(x)))
    return Layout(W, Z, lam, "low")


def simpson(ncell=100, left=1000.0, right=5000.0) -> Layout:
    """Unit square split at x = 1/2 with uniform intensity in each half; covariate x."""
    W = Window.unit_square()
    g = Grid.covering(0, 1, 0, 1, ncell)
    Z = Raster.from_function(g, lambda x, y: x)
    lam = Raster.from_function(g, lambda x, y: np.where(x < 0.5, left, right))
    return Layout(W, Z, lam, "high")


def simpson_halves():
    return Window(0.0, 0.5, 0.0, 1.0), Window(0.5, 1.0, 0.0, 1.0)


def csr_pattern(W: Window, n_expected: float, seed=None) -> PointPattern:
    """Homogeneous Poisson pattern on a rectangle."""
    rng = np.random.default_rng(seed)
    n = rng.poisson(n_expected)
    x = W.xmin + rng.random(n) * (W.xmax - W.xmin)
    y = W.ymin + rng.random(n) * (W.ymax - W.ymin)
    keep = W.contains(x, y)
    return PointPattern(x[keep], y[keep], W)
