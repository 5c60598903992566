"""Smooth convex quadratic objectives and their subspace minimizers.

Three objective kinds cover the regression and shrinkage problems:

* ``DiagonalWLS``      sum_u w_u (z_u - theta_u)^2
* ``PenalizedWLS``     the same plus penalty * sum of squared differences
                       across grid-neighbour pairs (a light roughness
                       penalty making the objective strictly convex even
                       when most weights vanish)
* ``GeneralQuadratic`` 0.5 theta' H theta + g' theta + c with H symmetric
                       positive semidefinite

Every objective knows how to minimize itself over the subspace of
vectors constant on the blocks of a partition (the workhorse of the
active-set solver): the reduced normal equations are assembled blockwise
and solved by a positive-definite factorization, falling back to an
eigenvalue pseudo-inverse (minimum-norm solution) when the reduced
system is singular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import GridShape, Partition

__all__ = [
    "DiagonalWLS",
    "PenalizedWLS",
    "GeneralQuadratic",
    "SubspaceSolveReport",
    "minimize_over_partition",
    "line_minimize",
]

# relative eigenvalue cutoff used by the pseudo-inverse fallback
_PINV_RTOL = 1e-10
# use a banded Cholesky for reduced systems when (bandwidth+1) * q is below this
_BANDED_BUDGET = 200_000


@dataclass
class SubspaceSolveReport:
    """Result of minimizing an objective over a partition subspace."""

    minimizer: np.ndarray
    reduced_dim: int
    used_pseudoinverse: bool


def _as_flat(x, p: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if len(x) != p:
        raise ValueError(f"{what}: expected {p} entries, got {len(x)}")
    return x


class DiagonalWLS:
    """Weighted least squares with a diagonal weight matrix.

    Weights may contain zeros (cells without observations); at least one
    weight must be positive.  With zero-weight blocks the subspace
    minimizer is not unique and the minimum-norm block value 0 is
    reported, flagged via ``used_pseudoinverse``.
    """

    def __init__(self, weights, targets):
        w = np.asarray(weights, dtype=float).ravel()
        z = np.asarray(targets, dtype=float).ravel()
        if w.shape != z.shape:
            raise ValueError("weights and targets must have the same size")
        if not np.isfinite(w).all() or not np.isfinite(z).all():
            raise ValueError("weights and targets must be finite")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
        if not (w > 0).any():
            raise ValueError("at least one weight must be positive")
        self.weights = w
        self.targets = z
        self.p = len(w)

    def value(self, theta) -> float:
        theta = _as_flat(theta, self.p, "value")
        return float(self.weights @ (self.targets - theta) ** 2)

    def gradient(self, theta) -> np.ndarray:
        theta = _as_flat(theta, self.p, "gradient")
        return 2.0 * self.weights * (theta - self.targets)

    def curvature(self, direction) -> float:
        d = _as_flat(direction, self.p, "curvature")
        return float(2.0 * (self.weights @ d**2))

    def dense_hessian(self) -> np.ndarray:
        return np.diag(2.0 * self.weights)

    def solve_on_partition(self, labels, q: int) -> tuple[np.ndarray, bool]:
        bw = np.bincount(labels, weights=self.weights, minlength=q)
        bwz = np.bincount(labels, weights=self.weights * self.targets, minlength=q)
        out = np.zeros(q)
        pos = bw > 0
        out[pos] = bwz[pos] / bw[pos]
        return out, bool((~pos).any())


class PenalizedWLS:
    """Weighted least squares plus a quadratic roughness penalty on a grid.

    Q(theta) = sum w (z - theta)^2 + penalty * sum over neighbouring grid
    cells (u, v) of (theta_v - theta_u)^2.  The penalty graph is the
    connected grid graph, so the objective is strictly convex as soon as
    penalty > 0 and some weight is positive.
    """

    def __init__(self, weights, targets, penalty: float, shape: GridShape):
        if penalty <= 0:
            raise ValueError(f"penalty must be positive, got {penalty}")
        w = np.asarray(weights, dtype=float).ravel()
        z = np.asarray(targets, dtype=float).ravel()
        if len(w) != shape.size or len(z) != shape.size:
            raise ValueError(f"weights/targets must have {shape.size} entries")
        if not np.isfinite(w).all() or not np.isfinite(z).all():
            raise ValueError("weights and targets must be finite")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
        if not (w > 0).any():
            raise ValueError("at least one weight must be positive")
        self.weights = w
        self.targets = z
        self.penalty = float(penalty)
        self.shape = shape
        self.p = shape.size

        idx = np.arange(self.p).reshape(shape.rows, shape.cols)
        horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
        vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
        edges = np.vstack([horiz, vert])
        self._e0 = np.ascontiguousarray(edges[:, 0])
        self._e1 = np.ascontiguousarray(edges[:, 1])
        m = len(edges)
        lam = self.penalty
        rows = np.concatenate([self._e0, self._e1, self._e0, self._e1, np.arange(self.p)])
        cols = np.concatenate([self._e1, self._e0, self._e0, self._e1, np.arange(self.p)])
        vals = np.concatenate(
            [np.full(m, -lam), np.full(m, -lam), np.full(m, lam), np.full(m, lam), w]
        )
        self._hess = sp.csr_matrix((2.0 * vals, (rows, cols)), shape=(self.p, self.p))

    def value(self, theta) -> float:
        theta = _as_flat(theta, self.p, "value")
        fit = self.weights @ (self.targets - theta) ** 2
        rough = ((theta[self._e1] - theta[self._e0]) ** 2).sum()
        return float(fit + self.penalty * rough)

    def gradient(self, theta) -> np.ndarray:
        theta = _as_flat(theta, self.p, "gradient")
        return self._hess @ theta - 2.0 * self.weights * self.targets

    def curvature(self, direction) -> float:
        d = _as_flat(direction, self.p, "curvature")
        rough = ((d[self._e1] - d[self._e0]) ** 2).sum()
        return float(2.0 * (self.weights @ d**2) + 2.0 * self.penalty * rough)

    def dense_hessian(self) -> np.ndarray:
        return self._hess.toarray()

    def solve_on_partition(self, labels, q: int) -> tuple[np.ndarray, bool]:
        lam = self.penalty
        la = labels[self._e0]
        lb = labels[self._e1]
        keep = la != lb
        la = la[keep]
        lb = lb[keep]
        dw = np.bincount(labels, weights=self.weights, minlength=q)
        rhs = 2.0 * np.bincount(labels, weights=self.weights * self.targets, minlength=q)
        if len(la):
            deg = np.bincount(la, minlength=q) + np.bincount(lb, minlength=q)
        else:
            deg = np.zeros(q)
        diag = 2.0 * (dw + lam * deg)
        if len(la):
            band = np.abs(la - lb)
            bandwidth = int(band.max())
        else:
            bandwidth = 0
        if (bandwidth + 1) * q <= _BANDED_BUDGET:
            ab = np.zeros((bandwidth + 1, q))
            ab[0] = diag
            if len(la):
                np.add.at(ab, (band, np.minimum(la, lb)), -2.0 * lam)
            try:
                return sla.solveh_banded(ab, rhs, lower=True), False
            except np.linalg.LinAlgError:
                pass
        rr = np.concatenate([la, lb, np.arange(q)])
        cc = np.concatenate([lb, la, np.arange(q)])
        vv = np.concatenate([np.full(2 * len(la), -2.0 * lam), diag])
        reduced = sp.csc_matrix((vv, (rr, cc)), shape=(q, q))
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", spla.MatrixRankWarning)
            sol = spla.spsolve(reduced, rhs)
        if np.isfinite(sol).all():
            return sol, False
        sol, *_ = np.linalg.lstsq(reduced.toarray(), rhs, rcond=_PINV_RTOL)
        return sol, True


class GeneralQuadratic:
    """0.5 theta' H theta + g' theta + c with symmetric PSD H."""

    def __init__(self, hessian, linear, constant: float = 0.0):
        h = np.asarray(hessian, dtype=float)
        g = np.asarray(linear, dtype=float).ravel()
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("hessian must be square")
        if len(g) != h.shape[0]:
            raise ValueError("linear term does not match hessian size")
        scale = max(1.0, np.abs(h).max() if h.size else 1.0)
        if np.abs(h - h.T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("hessian must be symmetric")
        self.hessian = 0.5 * (h + h.T)
        self.linear = g
        self.constant = float(constant)
        self.p = len(g)

    def value(self, theta) -> float:
        theta = _as_flat(theta, self.p, "value")
        return float(0.5 * theta @ (self.hessian @ theta) + self.linear @ theta + self.constant)

    def gradient(self, theta) -> np.ndarray:
        theta = _as_flat(theta, self.p, "gradient")
        return self.hessian @ theta + self.linear

    def curvature(self, direction) -> float:
        d = _as_flat(direction, self.p, "curvature")
        return float(d @ (self.hessian @ d))

    def dense_hessian(self) -> np.ndarray:
        return self.hessian.copy()

    def solve_on_partition(self, labels, q: int) -> tuple[np.ndarray, bool]:
        rowagg = np.zeros((q, self.p))
        np.add.at(rowagg, labels, self.hessian)
        reduced = np.zeros((q, q))
        np.add.at(reduced, labels, rowagg.T)
        reduced = 0.5 * (reduced + reduced.T)
        rhs = -np.bincount(labels, weights=self.linear, minlength=q)
        try:
            cho = sla.cho_factor(reduced)
            return sla.cho_solve(cho, rhs), False
        except np.linalg.LinAlgError:
            vals, vecs = np.linalg.eigh(reduced)
            cut = _PINV_RTOL * max(vals.max(initial=0.0), 1e-300)
            inv = np.where(vals > cut, 1.0 / np.where(vals > cut, vals, 1.0), 0.0)
            return vecs @ (inv * (vecs.T @ rhs)), True


def minimize_over_partition(objective, partition: Partition) -> SubspaceSolveReport:
    """Minimize an objective over vectors constant on the partition blocks.

    Solves the reduced normal equations on the block-indicator subspace;
    when those are singular (non-coercive objective, e.g. blocks with no
    observation weight) the minimum-norm solution is returned and
    flagged.
    """
    if partition.p != objective.p:
        raise ValueError(f"partition over {partition.p} indices, objective on {objective.p}")
    block_values, used_pinv = objective.solve_on_partition(partition.labels, partition.q)
    return SubspaceSolveReport(
        minimizer=block_values[partition.labels],
        reduced_dim=partition.q,
        used_pseudoinverse=used_pinv,
    )


def line_minimize(objective, theta, direction) -> float:
    """Exact minimizer of t -> Q(theta + t * direction) for quadratic Q.

    Returns -slope / curvature with slope = grad Q(theta) . direction and
    curvature = direction' H direction.  Raises when the curvature
    vanishes but the slope does not (the objective is linear and
    unbounded along that direction).
    """
    slope = float(objective.gradient(theta) @ np.asarray(direction, dtype=float).ravel())
    curv = objective.curvature(direction)
    if curv <= 0.0:
        if slope == 0.0:
            return 0.0
        raise ValueError("direction has zero curvature but nonzero slope; no finite minimizer")
    return -slope / curv
