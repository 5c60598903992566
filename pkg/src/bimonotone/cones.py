"""Order constraints, order cones and their combinatorial structure.

An order cone is the set of vectors x in R^p satisfying x[u] <= x[v] for
every pair (u, v) in a fixed constraint list.  The main instance is the
bimonotone cone of r x s matrices that are nondecreasing left-to-right
within every row and top-to-bottom within every column (matrices are
stored row-major, 0-based internally).

Besides plain constraint bookkeeping this module provides the pieces of
structure the active-set solver is built on:

* the extremal 0/1 points of a cone and the exact decomposition of any
  feasible vector into the cone's extremals (``level_decomposition``),
* partitions of the index set induced by active constraints or by level
  sets of a feasible vector,
* maximal step lengths that keep a convex combination inside the cone
  (``step_length``) or inside the complete-order cone of a feasible
  vector (``step_length_complete``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "GridShape",
    "ConstraintSet",
    "QuotientConeSpec",
    "Partition",
    "LevelDecomposition",
    "bimonotone_constraints",
    "is_feasible",
    "extremals_bruteforce",
    "level_decomposition",
    "active_partition",
    "level_partition",
    "step_length",
    "step_length_complete",
]

# Largest dimension for which exhaustive 0/1 enumeration is permitted.
_BRUTE_FORCE_LIMIT = 22


@dataclass(frozen=True)
class GridShape:
    """Shape of a two-way layout; indices are 0-based and row-major."""

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must have positive extent, got {self.rows}x{self.cols}")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def index(self, i: int, j: int) -> int:
        """Flat index of cell (i, j)."""
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"cell ({i}, {j}) outside {self.rows}x{self.cols} grid")
        return i * self.cols + j


class ConstraintSet:
    """A finite list of inequality constraints x[u] <= x[v] on R^p.

    Pairs are stored deduplicated and sorted, as an (m, 2) integer array
    with columns (u, v).  Equality constraints are expressed as the two
    opposite inequalities.
    """

    def __init__(self, p: int, pairs):
        if p < 1:
            raise ValueError(f"dimension must be >= 1, got {p}")
        pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
        if pairs.size:
            if pairs.min() < 0 or pairs.max() >= p:
                raise ValueError("constraint index out of range")
            if (pairs[:, 0] == pairs[:, 1]).any():
                raise ValueError("constraint pairs must relate distinct indices")
            pairs = np.unique(pairs, axis=0)
        self.p = int(p)
        self.pairs = pairs
        self.pairs.setflags(write=False)

    @property
    def n_constraints(self) -> int:
        return len(self.pairs)

    def __repr__(self):
        return f"ConstraintSet(p={self.p}, n_constraints={self.n_constraints})"


def bimonotone_constraints(shape: GridShape) -> ConstraintSet:
    """Constraint set of the bimonotone cone on the given grid.

    Contains one pair per horizontal neighbour (cell <= right neighbour)
    and one per vertical neighbour (cell <= lower neighbour), i.e.
    2*rows*cols - rows - cols pairs in total; these generate the full
    coordinatewise partial order of the grid.
    """
    r, s = shape.rows, shape.cols
    idx = np.arange(r * s).reshape(r, s)
    horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    return ConstraintSet(r * s, np.vstack([horiz, vert]))


@dataclass(frozen=True)
class QuotientConeSpec:
    """Cone of r x s matrices with collapsed leading rows and columns.

    A matrix theta belongs to the cone iff

    * its first ``head_rows`` rows are identical, and their common value is
      nondecreasing across the columns beyond ``head_cols``;
    * its first ``head_cols`` columns are identical, and their common value
      is nondecreasing across the rows beyond ``head_rows``;
    * the trailing (rows - head_rows) x (cols - head_cols) block is
      bimonotone.

    Together the first two bullets force the leading head_rows x head_cols
    block to be a single constant.  No ordering is imposed between the
    collapsed blocks and the trailing block, so the three constraint
    groups involve disjoint sets of free values.
    """

    rows: int
    cols: int
    head_rows: int
    head_cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must have positive extent")
        if not (0 <= self.head_rows < self.rows):
            raise ValueError(f"head_rows must be in [0, {self.rows - 1}]")
        if not (0 <= self.head_cols < self.cols):
            raise ValueError(f"head_cols must be in [0, {self.cols - 1}]")

    @property
    def shape(self) -> GridShape:
        return GridShape(self.rows, self.cols)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def contains(self, theta, tol: float = 0.0) -> bool:
        """Membership test, with absolute tolerance on each constraint."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.rows, self.cols):
            raise ValueError(f"expected shape {(self.rows, self.cols)}, got {theta.shape}")
        k, l = self.head_rows, self.head_cols
        if k >= 1:
            head = theta[:k, :]
            if np.abs(head - head[0]).max(initial=0.0) > tol:
                return False
            top = head[0, l:]
            if len(top) > 1 and np.diff(top).min() < -tol:
                return False
        if l >= 1:
            head = theta[:, :l]
            if np.abs(head - head[:, :1]).max(initial=0.0) > tol:
                return False
            left = head[k:, 0]
            if len(left) > 1 and np.diff(left).min() < -tol:
                return False
        block = theta[k:, l:]
        if block.shape[1] > 1 and np.diff(block, axis=1).min() < -tol:
            return False
        if block.shape[0] > 1 and np.diff(block, axis=0).min() < -tol:
            return False
        return True

    def constraint_set(self) -> ConstraintSet:
        """The cone as an explicit constraint list (equalities paired)."""
        r, s, k, l = self.rows, self.cols, self.head_rows, self.head_cols
        idx = np.arange(r * s).reshape(r, s)
        pairs = []
        if k >= 2:
            a = idx[: k - 1, :].ravel()
            b = idx[1:k, :].ravel()
            pairs.append(np.stack([a, b], axis=1))
            pairs.append(np.stack([b, a], axis=1))
        if l >= 2:
            a = idx[:, : l - 1].ravel()
            b = idx[:, 1:l].ravel()
            pairs.append(np.stack([a, b], axis=1))
            pairs.append(np.stack([b, a], axis=1))
        if k >= 1 and s - l >= 2:
            a = idx[0, l:-1]
            b = idx[0, l + 1:]
            pairs.append(np.stack([a, b], axis=1))
        if l >= 1 and r - k >= 2:
            a = idx[k:-1, 0]
            b = idx[k + 1:, 0]
            pairs.append(np.stack([a, b], axis=1))
        block = idx[k:, l:]
        if block.shape[1] >= 2:
            pairs.append(
                np.stack([block[:, :-1].ravel(), block[:, 1:].ravel()], axis=1)
            )
        if block.shape[0] >= 2:
            pairs.append(
                np.stack([block[:-1, :].ravel(), block[1:, :].ravel()], axis=1)
            )
        return ConstraintSet(r * s, np.vstack(pairs) if pairs else np.empty((0, 2), dtype=np.intp))


def is_feasible(x, cone: ConstraintSet, tol: float = 0.0) -> bool:
    """True iff x[v] - x[u] >= -tol for every constraint (u, v)."""
    x = np.asarray(x, dtype=float).ravel()
    if len(x) != cone.p:
        raise ValueError(f"expected vector of length {cone.p}, got {len(x)}")
    if not cone.n_constraints:
        return True
    gaps = x[cone.pairs[:, 1]] - x[cone.pairs[:, 0]]
    return bool(gaps.min() >= -tol)


def extremals_bruteforce(cone: ConstraintSet) -> np.ndarray:
    """All feasible 0/1 vectors of the cone, in lexicographic order.

    Exhaustive over 2^p candidates; restricted to p <= 22.  Used as the
    reference when validating the dynamic-program minimizers.
    """
    p = cone.p
    if p > _BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute-force enumeration limited to p <= {_BRUTE_FORCE_LIMIT}, got {p}")
    codes = np.arange(1 << p, dtype=np.uint32)
    ok = np.ones(len(codes), dtype=bool)
    for u, v in cone.pairs:
        # bit of index 0 is the most significant -> ascending code order is
        # lexicographic order of the vectors
        bu = (codes >> np.uint32(p - 1 - u)) & np.uint32(1)
        bv = (codes >> np.uint32(p - 1 - v)) & np.uint32(1)
        ok &= ~((bu == 1) & (bv == 0))
    good = codes[ok]
    out = np.zeros((len(good), p))
    for col in range(p):
        out[:, col] = (good >> np.uint32(p - 1 - col)) & np.uint32(1)
    return out


@dataclass
class LevelDecomposition:
    """Exact expansion of a feasible vector over extremal 0/1 points.

    ``x = base * 1 + sum_i weights[i] * indicators[i]`` where each
    indicator is the 0/1 vector of an upper level set of x (hence itself
    feasible) and all weights are positive; the weights sum to
    max(x) - min(x).
    """

    base: float
    indicators: np.ndarray  # (m, p), 0/1
    weights: np.ndarray  # (m,), positive

    def reconstruct(self) -> np.ndarray:
        out = np.full(self.indicators.shape[1] if self.indicators.size else 0, self.base)
        if self.indicators.size:
            out = self.base + self.weights @ self.indicators
        return out


def level_decomposition(x, cone: ConstraintSet | None = None) -> LevelDecomposition:
    """Decompose a feasible vector into weighted extremal indicators.

    The indicator of the upper level set {x >= a_i} is taken for every
    distinct value a_1 < ... < a_m above the minimum, with weight
    a_i - a_{i-1}.  If ``cone`` is given, x is checked for feasibility
    first (the level sets of a feasible vector are themselves feasible).
    """
    x = np.asarray(x, dtype=float).ravel()
    if cone is not None and not is_feasible(x, cone):
        raise ValueError("vector is not feasible for the given cone")
    vals = np.unique(x)
    base = float(vals[0])
    if len(vals) == 1:
        return LevelDecomposition(base, np.empty((0, len(x))), np.empty(0))
    indicators = (x[None, :] >= vals[1:, None]).astype(float)
    weights = np.diff(vals)
    return LevelDecomposition(base, indicators, weights)


@dataclass(frozen=True)
class Partition:
    """A partition of {0, ..., p-1} into q blocks, as a label vector.

    Labels are contiguous in [0, q).  For level partitions, label order
    follows ascending block value.
    """

    labels: np.ndarray
    q: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.intp)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1 or len(labels) == 0:
            raise ValueError("labels must be a nonempty 1-d array")
        if labels.min() < 0 or labels.max() >= self.q:
            raise ValueError("labels must lie in [0, q)")

    @property
    def p(self) -> int:
        return len(self.labels)

    def indicator(self) -> np.ndarray:
        """Dense (p, q) 0/1 block-membership matrix."""
        out = np.zeros((self.p, self.q))
        out[np.arange(self.p), self.labels] = 1.0
        return out


def _relabel_first_occurrence(raw: np.ndarray) -> tuple[np.ndarray, int]:
    """Make labels contiguous, numbered by first occurrence."""
    uniq, labels = np.unique(raw, return_inverse=True)
    # np.unique numbers blocks by raw id; renumber by first appearance
    first = np.full(len(uniq), len(raw), dtype=np.intp)
    np.minimum.at(first, labels, np.arange(len(raw)))
    order = np.argsort(first, kind="stable")
    remap = np.empty(len(uniq), dtype=np.intp)
    remap[order] = np.arange(len(uniq))
    return remap[labels], len(uniq)


def active_partition(theta, cone: ConstraintSet, tol: float = 0.0) -> Partition:
    """Blocks = connected components of the active-constraint graph.

    A constraint (u, v) is active when |theta[v] - theta[u]| <= tol; the
    solver uses tol = 0 because its steps set merged coordinates to
    identical floating-point values by construction.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    if len(theta) != cone.p:
        raise ValueError(f"expected vector of length {cone.p}, got {len(theta)}")
    pairs = cone.pairs
    if len(pairs):
        gaps = np.abs(theta[pairs[:, 1]] - theta[pairs[:, 0]])
        act = pairs[gaps <= tol]
    else:
        act = np.empty((0, 2), dtype=np.intp)
    graph = csr_matrix(
        (np.ones(len(act)), (act[:, 0], act[:, 1])), shape=(cone.p, cone.p)
    )
    _, raw = connected_components(graph, directed=False)
    labels, q = _relabel_first_occurrence(raw)
    return Partition(labels, q)


def level_partition(theta) -> Partition:
    """Blocks = level sets of theta, labelled in ascending value order."""
    theta = np.asarray(theta, dtype=float).ravel()
    vals, labels = np.unique(theta, return_inverse=True)
    return Partition(labels.astype(np.intp), len(vals))


def _check_respects_active(theta, x, pairs, what: str):
    if len(pairs):
        active = theta[pairs[:, 0]] == theta[pairs[:, 1]]
        if (x[pairs[active, 0]] != x[pairs[active, 1]]).any():
            raise ValueError(f"{what}: x must be constant across active constraints of theta")


def step_length(theta, x, cone: ConstraintSet) -> float:
    """Largest t in [0, 1] with (1-t) theta + t x feasible.

    Requires theta feasible and x constant on active constraints of
    theta (x lies in the active subspace).  Equals 1 when x is feasible;
    otherwise the minimum over violated pairs (x[u] > x[v]) of

        (theta[v] - theta[u]) / (theta[v] - theta[u] - x[v] + x[u]).
    """
    theta = np.asarray(theta, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if len(theta) != cone.p or len(x) != cone.p:
        raise ValueError(f"expected vectors of length {cone.p}")
    if not is_feasible(theta, cone):
        raise ValueError("theta must be feasible")
    pairs = cone.pairs
    _check_respects_active(theta, x, pairs, "step_length")
    if not len(pairs):
        return 1.0
    xg = x[pairs[:, 1]] - x[pairs[:, 0]]
    bad = xg < 0
    if not bad.any():
        return 1.0
    tg = theta[pairs[bad, 1]] - theta[pairs[bad, 0]]
    ratios = tg / (tg - xg[bad])
    return float(min(1.0, ratios.min()))


def step_length_complete(theta, x) -> float:
    """Largest t in [0, 1] keeping the combination in theta's complete-order cone.

    The complete-order cone of a vector theta consists of all vectors
    constant on theta's level sets whose block values are ordered like
    theta's.  x must be constant on those level sets.  Only consecutive
    level blocks can invert, so the minimum ratio runs over consecutive
    blocks (in ascending value order) with x decreasing across them.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if theta.shape != x.shape:
        raise ValueError("theta and x must have the same length")
    tvals, labels = np.unique(theta, return_inverse=True)
    xvals = np.full(len(tvals), np.nan)
    xvals[labels] = x
    if (xvals[labels] != x).any():
        raise ValueError("step_length_complete: x must be constant on the level sets of theta")
    if len(tvals) == 1:
        return 1.0
    tg = np.diff(tvals)
    xg = np.diff(xvals)
    bad = xg < 0
    if not bad.any():
        return 1.0
    ratios = tg[bad] / (tg[bad] - xg[bad])
    return float(min(1.0, ratios.min()))
