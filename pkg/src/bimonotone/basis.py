"""Discrete spline bases from banded difference annihilators.

For n design points and an order k, the annihilator is the (n - k) x n
banded matrix whose i-th row is the unit-norm k-th divided difference
supported on points i .. i+k; it maps every polynomial of degree < k to
zero.  An orthonormal basis of R^n adapted to it consists of

* k polynomial columns, the QR factors of the Vandermonde matrix of the
  points (the first column is the constant n^{-1/2} 1), followed by
* the n - k right singular vectors of the annihilator, ordered by
  ascending singular value (smoothest first).

Expanding a two-way data matrix in the tensor product of a row basis
and a column basis concentrates smooth structure in the low-order
coefficients; the coefficient blocks are indexed so that entry (0, 0)
carries the overall mean, the rest of the leading k rows / l columns
carry additive row and column effects, and the trailing block carries
the interaction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cones import QuotientConeSpec

__all__ = [
    "Annihilator",
    "build_annihilator",
    "BasisFactor",
    "build_basis",
    "SplineBasis",
    "make_spline_basis",
]


@dataclass(frozen=True)
class Annihilator:
    """Banded k-th order difference operator on n points.

    ``matrix`` has shape (n - k, n); row i is supported on columns
    i .. i+k, has unit Euclidean norm and positive leading entry, and
    annihilates the columns of the degree-(k-1) Vandermonde matrix.
    """

    n: int
    order: int
    points: np.ndarray
    matrix: np.ndarray

    def apply(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)


def _local_null_vector(pts: np.ndarray, k: int) -> np.ndarray:
    """Unit null vector of the k x (k+1) Vandermonde on k+1 points."""
    vand = np.vander(pts, N=k, increasing=True).T
    _, _, vt = np.linalg.svd(vand, full_matrices=True)
    v = vt[-1]
    lead = np.flatnonzero(np.abs(v) > 1e-12 * np.abs(v).max())[0]
    if v[lead] < 0:
        v = -v
    return v / np.linalg.norm(v)


def build_annihilator(n: int, order: int, points=None) -> Annihilator:
    """Annihilator of order ``order`` on ``n`` points (default equispaced).

    Points must be strictly increasing; order must satisfy
    1 <= order < n.
    """
    if not 1 <= order < n:
        raise ValueError(f"order must satisfy 1 <= order < n = {n}")
    if points is None:
        pts = np.arange(n, dtype=float)
    else:
        pts = np.asarray(points, dtype=float).ravel()
        if len(pts) != n:
            raise ValueError(f"expected {n} points, got {len(pts)}")
        if n > 1 and np.diff(pts).min() <= 0:
            raise ValueError("points must be strictly increasing")
    mat = np.zeros((n - order, n))
    for i in range(n - order):
        window = pts[i : i + order + 1]
        # shift for conditioning; the null space is translation invariant
        mat[i, i : i + order + 1] = _local_null_vector(window - window[0], order)
    return Annihilator(n=n, order=order, points=pts, matrix=mat)


@dataclass(frozen=True)
class BasisFactor:
    """Orthonormal n x n basis for one margin of a two-way layout.

    Columns 0 .. order-1 span the polynomials of degree < order (column
    0 is the normalized constant); the remaining columns are annihilator
    right singular vectors with singular values ``sigma`` in ascending
    order.
    """

    n: int
    order: int
    points: np.ndarray
    columns: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.columns.shape != (self.n, self.n):
            raise ValueError("basis must be square")


def build_basis(n: int, order: int, points=None) -> BasisFactor:
    """Orthonormal basis adapted to the order-``order`` annihilator."""
    ann = build_annihilator(n, order, points)
    vand = np.vander(ann.points, N=order, increasing=True)
    q_poly, r_poly = np.linalg.qr(vand)
    flip = np.sign(np.diag(r_poly))
    flip[flip == 0] = 1.0
    q_poly = q_poly * flip
    _, svals, vt = np.linalg.svd(ann.matrix, full_matrices=False)
    rough = vt[::-1].T
    sigma = svals[::-1].copy()
    for j in range(rough.shape[1]):
        lead = np.argmax(np.abs(rough[:, j]))
        if rough[lead, j] < 0:
            rough[:, j] = -rough[:, j]
    cols = np.hstack([q_poly, rough])
    return BasisFactor(n=n, order=order, points=ann.points, columns=cols, sigma=sigma)


@dataclass(frozen=True)
class SplineBasis:
    """Tensor-product basis for r x s two-way layouts."""

    row: BasisFactor
    col: BasisFactor

    @property
    def shape(self):
        return (self.row.n, self.col.n)

    def transform(self, z) -> np.ndarray:
        """Coefficients of z: U_row^T z U_col."""
        z = np.asarray(z, dtype=float)
        if z.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {z.shape}")
        return self.row.columns.T @ z @ self.col.columns

    def inverse_transform(self, coef) -> np.ndarray:
        """Reconstruction from coefficients: U_row coef U_col^T."""
        coef = np.asarray(coef, dtype=float)
        if coef.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {coef.shape}")
        return self.row.columns @ coef @ self.col.columns.T

    def component_masks(self):
        """Boolean masks (constant, additive, interaction) on coefficients.

        The constant is entry (0, 0); the additive part is the rest of
        the leading ``row.order`` rows and ``col.order`` columns; the
        interaction is the trailing block.  The three masks partition
        the grid.
        """
        r, s = self.shape
        k, l = self.row.order, self.col.order
        constant = np.zeros((r, s), dtype=bool)
        constant[0, 0] = True
        additive = np.zeros((r, s), dtype=bool)
        additive[:k, :] = True
        additive[:, :l] = True
        additive[0, 0] = False
        interaction = ~(constant | additive)
        return constant, additive, interaction

    def quotient_cone(self) -> QuotientConeSpec:
        """Order cone matching the coefficient blocks of this basis."""
        return QuotientConeSpec(
            rows=self.row.n,
            cols=self.col.n,
            head_rows=self.row.order,
            head_cols=self.col.order,
        )


def make_spline_basis(rows: int, cols: int, row_order: int, col_order: int,
                      row_points=None, col_points=None) -> SplineBasis:
    """Convenience constructor for the tensor-product basis."""
    return SplineBasis(
        row=build_basis(rows, row_order, row_points),
        col=build_basis(cols, col_order, col_points),
    )
