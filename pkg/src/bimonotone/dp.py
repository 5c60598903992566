"""Minimization of linear functionals over extremal 0/1 matrices.

The extremal points of the bimonotone cone on an r x s grid are the 0/1
bimonotone matrices; there are binomial(r+s, r) of them, so enumeration
is hopeless beyond toy sizes.  ``dp_min_linear`` minimizes
L(e) = sum(a * e) over all of them in O(r s) time with a two-pass
dynamic program: a table of partial minima H is filled bottom-up, then a
minimizing matrix is reconstructed by walking the argmin decisions from
the top-right corner.

``min_linear_quotient`` does the same over the 0/1 points of a quotient
cone with collapsed leading rows/columns; the constraint groups of that
cone involve disjoint sets of free values, so the minimization splits
into a constant block, two monotone chains and a smaller bimonotone
problem.
"""

from __future__ import annotations

import numpy as np

from .cones import ConstraintSet, extremals_bruteforce

__all__ = ["dp_tableau", "dp_min_linear", "min_linear_quotient", "brute_min_linear"]


def dp_tableau(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Suffix sums b and partial-minimum table H for ``dp_min_linear``.

    Both tables are 1-based in (k, l) with padding, matching the
    recursion

        H[k, 1]   = H[k+1, 1] + b[k, 1]
        H[k, l+1] = min(H[k, l], b[k, l+1] + H[k+1, l+1])

    where b[k, l] = sum_{j >= l} a[k, j] and H[r+1, .] = 0.  H[k, l] is
    the minimum of the partial sum over rows >= k among extremal
    matrices whose (k, l) entry is 1; H[1, s+1] is the global minimum.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={a.ndim}")
    r, s = a.shape
    b = np.zeros((r + 1, s + 2))
    b[1:, 1 : s + 1] = a[:, ::-1].cumsum(axis=1)[:, ::-1]
    h = np.zeros((r + 2, s + 2))
    for k in range(r, 0, -1):
        row = np.empty(s + 1)
        row[0] = h[k + 1, 1] + b[k, 1]
        row[1:] = b[k, 2 : s + 2] + h[k + 1, 2 : s + 2]
        h[k, 1 : s + 2] = np.minimum.accumulate(row)
    return b, h


def dp_min_linear(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimize sum(a * e) over extremal bimonotone 0/1 matrices e.

    Returns (e, value).  Ties are resolved by following the "keep the
    partial minimum" branch of the backtrack, which yields the
    pointwise-largest minimizer.  The zero matrix and the all-ones
    matrix are among the candidates, so value <= 0 always.
    """
    a = np.asarray(a, dtype=float)
    r, s = a.shape
    _, h = dp_tableau(a)
    e = np.zeros((r, s))
    k, l = 1, s
    while k <= r and l >= 1:
        if h[k, l + 1] == h[k, l]:
            e[k - 1 :, l - 1] = 1.0
            l -= 1
        else:
            k += 1
    return e, float(h[1, s + 1])


def _chain_min_suffix(costs: np.ndarray) -> tuple[int, float]:
    """Best threshold for a monotone 0/1 chain with per-slot costs.

    Over chains (0,..,0,1,..,1) the objective is the suffix sum of
    ``costs`` from the threshold on; returns (threshold, value) with the
    smallest threshold among minimizers (the pointwise-largest chain).
    Threshold == len(costs) means the all-zero chain.
    """
    n = len(costs)
    suffix = np.zeros(n + 1)
    suffix[:n] = costs[::-1].cumsum()[::-1]
    t = int(np.argmin(suffix))
    return t, float(suffix[t])


def min_linear_quotient(a: np.ndarray, head_rows: int, head_cols: int) -> tuple[np.ndarray, float]:
    """Minimize sum(a * e) over the 0/1 points of a quotient cone.

    The cone collapses the leading ``head_rows`` rows and ``head_cols``
    columns (see ``QuotientConeSpec``); its 0/1 points consist of a
    constant leading block, two monotone chains and an extremal
    bimonotone trailing block, all free of mutual constraints.  With
    head_rows == head_cols == 0 this is exactly ``dp_min_linear``.
    """
    a = np.asarray(a, dtype=float)
    r, s = a.shape
    k, l = head_rows, head_cols
    if not (0 <= k < r) or not (0 <= l < s):
        raise ValueError("head_rows/head_cols out of range for the given matrix")
    e = np.zeros((r, s))
    value = 0.0
    if k >= 1 and l >= 1:
        blk = a[:k, :l].sum()
        if blk <= 0.0:
            e[:k, :l] = 1.0
            value += blk
    if k >= 1:
        costs = a[:k, l:].sum(axis=0)
        t, v = _chain_min_suffix(costs)
        e[:k, l + t :] = 1.0
        value += v
    if l >= 1:
        costs = a[k:, :l].sum(axis=1)
        t, v = _chain_min_suffix(costs)
        e[k + t :, :l] = 1.0
        value += v
    sub, v = dp_min_linear(a[k:, l:])
    e[k:, l:] = sub
    value += v
    return e, value


def brute_min_linear(a, cone: ConstraintSet) -> tuple[np.ndarray, float]:
    """Reference minimizer by exhaustive enumeration (p <= 22).

    Returns the lexicographically smallest minimizer and the minimum
    value of sum(a * e) over all feasible 0/1 vectors of the cone.
    """
    a = np.asarray(a, dtype=float).ravel()
    if len(a) != cone.p:
        raise ValueError(f"expected {cone.p} coefficients, got {len(a)}")
    candidates = extremals_bruteforce(cone)
    values = candidates @ a
    i = int(np.argmin(values))
    return candidates[i], float(values[i])
