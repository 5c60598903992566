"""Weighted pool-adjacent-violators for isotonic chains.

Solves min sum_i w_i (z_i - m_i)^2 over nondecreasing m with a single
left-to-right pass and a stack of pooled blocks; each pooled block ends
up at the weighted mean of its members.  Also provided in a grouped
form where the chain elements are pre-aggregated blocks, which is how
the active-set solver minimizes over the complete-order cone of an
iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ChainProblem", "pava_fit", "pava_fit_grouped"]


@dataclass
class ChainProblem:
    """Weighted least-squares data on a chain: targets z, weights w > 0."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.values, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(z) == 0:
            raise ValueError("chain must be nonempty")
        if len(w) != len(z):
            raise ValueError(f"{len(z)} values but {len(w)} weights")
        if not np.isfinite(z).all() or not np.isfinite(w).all():
            raise ValueError("values and weights must be finite")
        if (w <= 0).any():
            raise ValueError("weights must be strictly positive")
        self.values = z
        self.weights = w

    def __len__(self):
        return len(self.values)


def _pava(z: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Core pass; returns (pooled means, pooled lengths)."""
    n = len(z)
    means = np.empty(n)
    wsum = np.empty(n)
    count = np.empty(n, dtype=np.intp)
    top = -1
    for i in range(n):
        top += 1
        means[top] = z[i]
        wsum[top] = w[i]
        count[top] = 1
        # merge only on strict inversions; equal neighbouring means stay split
        while top > 0 and means[top - 1] > means[top]:
            tw = wsum[top - 1] + wsum[top]
            means[top - 1] = (wsum[top - 1] * means[top - 1] + wsum[top] * means[top]) / tw
            wsum[top - 1] = tw
            count[top - 1] += count[top]
            top -= 1
    return means[: top + 1], count[: top + 1]


def pava_fit(problem: ChainProblem) -> np.ndarray:
    """Nondecreasing weighted least-squares fit of a chain."""
    means, counts = _pava(problem.values, problem.weights)
    return np.repeat(means, counts)


def pava_fit_grouped(values, weights, labels, q: int | None = None) -> np.ndarray:
    """Isotonic fit with equality within pre-assigned consecutive blocks.

    ``labels[i]`` is the block of element i; blocks must be numbered
    0..q-1 in chain order.  Minimizes the weighted least-squares
    objective over vectors constant within blocks and nondecreasing
    across them, which reduces to ``pava_fit`` on the blockwise weighted
    means with aggregated weights.  Returns the q fitted block values.
    """
    z = np.asarray(values, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    labels = np.asarray(labels, dtype=np.intp).ravel()
    if not (len(z) == len(w) == len(labels)):
        raise ValueError("values, weights and labels must have equal length")
    if q is None:
        q = int(labels.max()) + 1 if len(labels) else 0
    bw = np.bincount(labels, weights=w, minlength=q)
    if (bw <= 0).any():
        raise ValueError("every block must carry positive total weight")
    bz = np.bincount(labels, weights=w * z, minlength=q) / bw
    means, counts = _pava(bz, bw)
    return np.repeat(means, counts)
