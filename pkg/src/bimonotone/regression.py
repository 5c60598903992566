"""Bimonotone least squares regression on two-way layouts.

Observations (i, j, z) on an r x s grid are aggregated into cell means
and weights; the regression function is assumed nondecreasing in both
factors.  Three fitting modes cover complete and incomplete layouts:

* complete      weighted least squares projection of the cell means
                onto the bimonotone cone (every cell observed);
* simple        the projection using observed cells only, extended to
                empty cells by quadrant envelopes: the midpoint of the
                largest and smallest bimonotone extensions that agree
                with the fit on the observed cells;
* lightreg      weighted least squares plus a small quadratic roughness
                penalty on neighbour differences, which makes the
                objective strictly convex so all cells are determined,
                while perturbing the fit on observed cells only at the
                order of the penalty weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cones import GridShape
from .objectives import DiagonalWLS, PenalizedWLS
from .solver import SolverConfig, SolveResult, solve

__all__ = [
    "LayoutData",
    "aggregate",
    "FitResult",
    "fit_complete",
    "fit_incomplete_simple",
    "fit_incomplete_regularized",
    "fit_layout",
    "aad",
]

DEFAULT_PENALTY = 1e-4


@dataclass(frozen=True)
class LayoutData:
    """Aggregated two-way layout: per-cell weights and weighted means.

    ``means`` is zero in cells with zero weight; such cells carry no
    information and are handled by the fitting mode.
    """

    shape: GridShape
    weights: np.ndarray
    means: np.ndarray

    def __post_init__(self):
        expect = (self.shape.rows, self.shape.cols)
        if self.weights.shape != expect or self.means.shape != expect:
            raise ValueError(f"weights/means must have shape {expect}")
        if not np.isfinite(self.weights).all() or self.weights.min() < 0:
            raise ValueError("weights must be finite and nonnegative")
        if not self.weights.any():
            raise ValueError("layout has no observations")
        if not np.isfinite(self.means).all():
            raise ValueError("means must be finite")

    @property
    def observed(self) -> np.ndarray:
        return self.weights > 0

    @property
    def complete(self) -> bool:
        return bool(self.observed.all())


def aggregate(rows, cols, values, shape: GridShape, weights=None) -> LayoutData:
    """Aggregate raw observations into a ``LayoutData``.

    rows/cols are 0-based cell indices; repeated cells combine into a
    weighted mean with summed weight (unit weights by default).
    """
    rows = np.asarray(rows, dtype=np.intp).ravel()
    cols = np.asarray(cols, dtype=np.intp).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if not (len(rows) == len(cols) == len(values)):
        raise ValueError("rows, cols and values must have equal length")
    if len(rows) == 0:
        raise ValueError("no observations")
    if weights is None:
        w = np.ones(len(rows))
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if len(w) != len(rows):
            raise ValueError("weights must match observations")
        if w.min() <= 0:
            raise ValueError("observation weights must be positive")
    if rows.min() < 0 or rows.max() >= shape.rows or cols.min() < 0 or cols.max() >= shape.cols:
        raise ValueError("cell index out of range")
    if not np.isfinite(values).all():
        raise ValueError("values must be finite")
    flat = rows * shape.cols + cols
    p = shape.size
    wsum = np.bincount(flat, weights=w, minlength=p)
    wz = np.bincount(flat, weights=w * values, minlength=p)
    means = np.zeros(p)
    np.divide(wz, wsum, out=means, where=wsum > 0)
    return LayoutData(
        shape=shape,
        weights=wsum.reshape(shape.rows, shape.cols),
        means=means.reshape(shape.rows, shape.cols),
    )


@dataclass
class FitResult:
    """A fitted bimonotone matrix plus solver diagnostics.

    For mode "simple", ``lower`` and ``upper`` hold the two quadrant
    envelopes whose midpoint is ``theta``; otherwise they are None.
    """

    theta: np.ndarray
    mode: str
    solve_result: SolveResult
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None


def fit_complete(layout: LayoutData, config: SolverConfig | None = None) -> FitResult:
    """Weighted least squares over the bimonotone cone (all cells observed)."""
    if not layout.complete:
        raise ValueError("complete fit requires a weight in every cell")
    objective = DiagonalWLS(layout.weights.ravel(), layout.means.ravel())
    res = solve(objective, layout.shape, config)
    return FitResult(theta=res.theta.reshape(layout.weights.shape), mode="complete",
                     solve_result=res)


def _quadrant_envelopes(theta_check: np.ndarray, observed: np.ndarray):
    """Tightest bimonotone bracket around the fit on the observed cells.

    lower[i, j] is the largest observed fitted value in the upper-left
    quadrant (u <= i, v <= j), floored at the smallest observed fitted
    value; upper[i, j] is the smallest observed fitted value in the
    lower-right quadrant, capped at the largest.  Both are bimonotone,
    agree with theta_check on observed cells, and bracket every
    bimonotone matrix that agrees there.
    """
    lo_fill = np.where(observed, theta_check, -np.inf)
    lower = np.maximum.accumulate(np.maximum.accumulate(lo_fill, axis=0), axis=1)
    lower = np.maximum(lower, theta_check[observed].min())
    hi_fill = np.where(observed, theta_check, np.inf)
    upper = np.minimum.accumulate(np.minimum.accumulate(hi_fill[::-1, ::-1], axis=0), axis=1)[::-1, ::-1]
    upper = np.minimum(upper, theta_check[observed].max())
    return lower, upper


def fit_incomplete_simple(layout: LayoutData, config: SolverConfig | None = None) -> FitResult:
    """Least squares fit with quadrant interpolation into empty cells.

    First minimizes the weighted least squares criterion over the cone
    (cells without data have zero weight and are only constrained); the
    fitted values on observed cells are the same for every minimizer.
    Empty cells then receive the midpoint of the lower and upper
    quadrant envelopes of the observed fitted values.
    """
    objective = DiagonalWLS(layout.weights.ravel(), layout.means.ravel())
    res = solve(objective, layout.shape, config)
    theta_check = res.theta.reshape(layout.weights.shape)
    lower, upper = _quadrant_envelopes(theta_check, layout.observed)
    theta = 0.5 * (lower + upper)
    return FitResult(theta=theta, mode="simple", solve_result=res,
                     lower=lower, upper=upper)


def fit_incomplete_regularized(layout: LayoutData, penalty: float = DEFAULT_PENALTY,
                               config: SolverConfig | None = None) -> FitResult:
    """Least squares with a light neighbour-difference penalty.

    Minimizes sum w (z - theta)^2 + penalty * sum of squared horizontal
    and vertical neighbour differences over the cone; any positive
    penalty makes the objective strictly convex so empty cells are
    interpolated smoothly.
    """
    if penalty <= 0:
        raise ValueError("penalty must be positive")
    objective = PenalizedWLS(layout.weights.ravel(), layout.means.ravel(),
                             penalty, layout.shape)
    res = solve(objective, layout.shape, config)
    return FitResult(theta=res.theta.reshape(layout.weights.shape), mode="lightreg",
                     solve_result=res)


def fit_layout(layout: LayoutData, mode: str, penalty: float = DEFAULT_PENALTY,
               config: SolverConfig | None = None) -> FitResult:
    """Dispatch on mode: "complete", "simple" or "lightreg"."""
    if mode == "complete":
        return fit_complete(layout, config)
    if mode == "simple":
        return fit_incomplete_simple(layout, config)
    if mode == "lightreg":
        return fit_incomplete_regularized(layout, penalty, config)
    raise ValueError(f"unknown mode {mode!r}")


def aad(a, b) -> float:
    """Average absolute deviation between two arrays of equal shape."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    return float(np.mean(np.abs(a - b)))
