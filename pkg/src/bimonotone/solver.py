"""Active-set minimization of convex quadratics over order cones.

The finite-dimensional problem is min Q(theta) subject to theta lying in
an order cone K.  A point theta in K minimizes Q iff

    grad Q(theta) . theta == 0   and   grad Q(theta) . e >= 0

for every extremal 0/1 point e of K and for e = -1 (all-ones reversed),
so optimality can be certified by a single linear minimization over the
extremal points.  The solver alternates two moves:

* optimality check / descent: minimize grad Q(theta) . e over extremals
  (dynamic program for grid cones, exhaustive for small generic cones);
  a negative minimum yields a feasible descent ray, followed to its
  exact line minimum;
* subspace refinement: minimize Q over a shrinking family of partition
  subspaces until the subspace minimizer is itself feasible.  Three
  interchangeable refinement strategies are provided: partitions from
  the active-constraint graph ("graph"), partitions from level sets with
  complete-order clipping ("levels"), and direct pool-adjacent-violators
  on level blocks for diagonal weighted least squares ("pava").

Each refinement ends at the exact minimizer of Q over a partition
subspace, so the gradient conditions above hold there up to linear-solve
precision; iterates stay exactly feasible because clipped steps are
computed blockwise and merged blocks are assigned identical values by
construction.  Finiteness follows since every refinement minimizes over
a strictly smaller subspace until it terminates, and the outer loop
strictly decreases Q over a finite family of partitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .cones import (
    ConstraintSet,
    GridShape,
    QuotientConeSpec,
    active_partition,
    bimonotone_constraints,
    is_feasible,
)
from .dp import brute_min_linear, dp_min_linear, min_linear_quotient
from .objectives import DiagonalWLS, line_minimize
from .pava import ChainProblem, pava_fit

__all__ = [
    "SolverConfig",
    "Certificate",
    "SolveResult",
    "SolverError",
    "check_optimality",
    "improve_step",
    "refine_on_active_graph",
    "refine_on_levels",
    "refine_by_pava",
    "solve",
]

_STRATEGIES = ("graph", "levels", "pava")


@dataclass
class SolverConfig:
    """Knobs for ``solve``.

    strategy: one of {"graph", "levels", "pava"}; None picks "pava" for
        diagonal WLS objectives and "levels" otherwise.
    tol: certificate tolerance, applied relative to a gradient scale
        captured at the starting point.
    max_outer: bound on outer iterations (default 10 p + 100).
    """

    strategy: str | None = None
    tol: float = 1e-9
    max_outer: int | None = None

    def __post_init__(self):
        if self.strategy is not None and self.strategy not in _STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {_STRATEGIES}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass
class Certificate:
    """Optimality certificate values at the returned point.

    Optimal iff grad.theta and grad.1 vanish and the minimal slope over
    extremal directions is nonnegative, all within tol * scale.
    """

    grad_dot_theta: float
    grad_dot_ones: float
    min_slope: float
    scale: float
    tol: float

    def ok(self, tol: float | None = None) -> bool:
        eps = (self.tol if tol is None else tol) * self.scale
        return (
            abs(self.grad_dot_theta) <= eps
            and abs(self.grad_dot_ones) <= eps
            and self.min_slope >= -eps
        )


@dataclass
class SolveResult:
    theta: np.ndarray
    objective_value: float
    certificate: Certificate
    outer_iterations: int
    subspace_solves: int
    strategy: str
    used_pseudoinverse: bool
    converged: bool


class SolverError(RuntimeError):
    """Raised when the iteration budget is exhausted before certification."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory or []


@dataclass
class _ConeOps:
    """Uniform view of a cone: constraint list + extremal linear minimizer."""

    p: int
    constraints: ConstraintSet
    min_linear: callable


def _cone_ops(cone) -> _ConeOps:
    if isinstance(cone, GridShape):
        cons = bimonotone_constraints(cone)
        r, s = cone.rows, cone.cols

        def mini(a):
            e, val = dp_min_linear(a.reshape(r, s))
            return e.ravel(), val

        return _ConeOps(cone.size, cons, mini)
    if isinstance(cone, QuotientConeSpec):
        cons = cone.constraint_set()
        r, s = cone.rows, cone.cols
        k, l = cone.head_rows, cone.head_cols

        def mini(a):
            e, val = min_linear_quotient(a.reshape(r, s), k, l)
            return e.ravel(), val

        return _ConeOps(cone.size, cons, mini)
    if isinstance(cone, ConstraintSet):
        cache = {}

        def mini(a):
            if "extremals" not in cache:
                from .cones import extremals_bruteforce

                cache["extremals"] = extremals_bruteforce(cone)
            ext = cache["extremals"]
            vals = ext @ a
            i = int(np.argmin(vals))
            return ext[i].copy(), float(vals[i])

        return _ConeOps(cone.p, cone, mini)
    raise TypeError(f"unsupported cone specification: {type(cone).__name__}")


def check_optimality(objective, theta, cone, tol: float = 1e-7):
    """Minimal-slope extremal direction at theta.

    Requires the gradient conditions grad.theta == grad.1 == 0 (within
    tol * max(1, |grad|_inf)); these hold at any partition-subspace
    minimizer, and the caller must re-establish them after steps.
    Returns (direction, slope); theta is optimal iff slope >= 0 up to
    tolerance.
    """
    ops = _cone_ops(cone)
    theta = np.asarray(theta, dtype=float).ravel()
    grad = objective.gradient(theta)
    scale = max(1.0, np.abs(grad).max(initial=0.0))
    if abs(grad @ theta) > tol * scale or abs(grad.sum()) > tol * scale:
        raise ValueError(
            "gradient conditions violated at theta; minimize over a partition "
            "subspace containing theta and the constants first"
        )
    direction, _ = ops.min_linear(grad)
    return direction, float(grad @ direction)


def improve_step(objective, theta, direction) -> np.ndarray:
    """Exact line minimum along a descent ray; requires negative slope."""
    theta = np.asarray(theta, dtype=float).ravel()
    direction = np.asarray(direction, dtype=float).ravel()
    slope = float(objective.gradient(theta) @ direction)
    if slope >= 0:
        raise ValueError(f"not a descent direction (slope = {slope:g})")
    t = line_minimize(objective, theta, direction)
    return theta + t * direction


def _coalesce_levels(blend: np.ndarray, forced: np.ndarray | None):
    """Group consecutive level blocks after a clipped step.

    ``blend`` holds blockwise-blended values in ascending original
    order; groups are cut only where the value strictly increases (and
    never across a forced boundary).  Returns (old->new label map, new
    strictly increasing representative values).
    """
    q = len(blend)
    new_block = np.ones(q, dtype=bool)
    if q > 1:
        new_block[1:] = np.diff(blend) > 0
        if forced is not None and len(forced):
            new_block[forced + 1] = False
    labels = np.cumsum(new_block) - 1
    starts = np.flatnonzero(new_block)
    reps = np.maximum.reduceat(blend, starts)
    # ulp-level blend noise can leave representatives non-increasing; sweep again
    while len(reps) > 1 and (np.diff(reps) <= 0).any():
        keep = np.ones(len(reps), dtype=bool)
        keep[1:] = np.diff(reps) > 0
        relab = np.cumsum(keep) - 1
        reps = np.maximum.reduceat(reps, np.flatnonzero(keep))
        labels = relab[labels]
    return labels, reps


def refine_on_levels(objective, theta, stats: dict | None = None):
    """Minimize Q over successively coarser level-set subspaces.

    Starting from the level partition of theta, repeatedly minimizes Q
    over vectors constant on the blocks; if the minimizer violates the
    ascending block order, steps to the largest feasible convex
    combination (which makes at least one consecutive pair of blocks
    collide), merges the collided blocks and re-solves.  Ends at the
    exact minimizer over the final subspace, which respects the complete
    order of theta's level sets.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    reps, labels = np.unique(theta, return_inverse=True)
    q = len(reps)
    used_pinv = False
    while True:
        block_values, pinv = objective.solve_on_partition(labels, q)
        if stats is not None:
            stats["subspace_solves"] = stats.get("subspace_solves", 0) + 1
        used_pinv |= pinv
        if q == 1:
            break
        xgap = np.diff(block_values)
        bad = np.flatnonzero(xgap < 0)
        if not len(bad):
            break
        tgap = np.diff(reps)
        ratios = tgap[bad] / (tgap[bad] - xgap[bad])
        t = ratios.min()
        forced = bad[ratios == t]
        blend = (1.0 - t) * reps + t * block_values
        relabel, reps = _coalesce_levels(blend, forced)
        labels = relabel[labels]
        q = len(reps)
    if stats is not None:
        stats["used_pseudoinverse"] = stats.get("used_pseudoinverse", False) or used_pinv
    return block_values[labels]


def refine_on_active_graph(objective, theta, cone, stats: dict | None = None):
    """Minimize Q over subspaces from the active-constraint graph.

    Same clipped-step scheme as ``refine_on_levels`` but the partition
    blocks are the connected components of theta's active constraints,
    and the step length is controlled by all violated constraint pairs
    rather than consecutive levels only.
    """
    ops = cone if isinstance(cone, _ConeOps) else _cone_ops(cone)
    theta = np.asarray(theta, dtype=float).ravel()
    part = active_partition(theta, ops.constraints)
    labels, q = part.labels, part.q
    first = np.full(q, len(theta), dtype=np.intp)
    np.minimum.at(first, labels, np.arange(len(theta)))
    reps = theta[first]
    pl = labels[ops.constraints.pairs] if ops.constraints.n_constraints else np.empty((0, 2), dtype=np.intp)
    pl = pl[pl[:, 0] != pl[:, 1]]
    used_pinv = False
    while True:
        block_values, pinv = objective.solve_on_partition(labels, q)
        if stats is not None:
            stats["subspace_solves"] = stats.get("subspace_solves", 0) + 1
        used_pinv |= pinv
        if not len(pl):
            break
        xgap = block_values[pl[:, 1]] - block_values[pl[:, 0]]
        bad = np.flatnonzero(xgap < 0)
        if not len(bad):
            break
        tgap = reps[pl[bad, 1]] - reps[pl[bad, 0]]
        ratios = tgap / (tgap - xgap[bad])
        t = ratios.min()
        forced = bad[ratios == t]
        blend = (1.0 - t) * reps + t * block_values
        # merge every pair whose blended gap closed (plus the limiting pair)
        gap = blend[pl[:, 1]] - blend[pl[:, 0]]
        closing = np.zeros(len(pl), dtype=bool)
        closing[gap <= 0] = True
        closing[forced] = True
        merge = pl[closing]
        graph = csr_matrix((np.ones(len(merge)), (merge[:, 0], merge[:, 1])), shape=(q, q))
        _, raw = connected_components(graph, directed=False)
        uniq, relabel = np.unique(raw, return_inverse=True)
        q2 = len(uniq)
        # representative value: the blended value of each component's first block
        firstb = np.full(q2, q, dtype=np.intp)
        np.minimum.at(firstb, relabel, np.arange(q))
        reps = blend[firstb]
        labels = relabel[labels]
        pl = relabel[pl]
        pl = pl[pl[:, 0] != pl[:, 1]]
        q = q2
    if stats is not None:
        stats["used_pseudoinverse"] = stats.get("used_pseudoinverse", False) or used_pinv
    return block_values[labels]


def refine_by_pava(objective, theta, stats: dict | None = None):
    """Minimize diagonal WLS over the complete-order cone of theta.

    The minimizer over vectors constant on theta's level sets *and*
    ordered like them is the weighted isotonic regression of the block
    means, so a single pool-adjacent-violators pass replaces the
    solve/clip/merge loop.  Level blocks without any observation weight
    do not influence the objective; they keep their previous value
    clipped into the monotone envelope of the fitted blocks, which
    preserves feasibility without disturbing neighbouring levels.
    """
    if not isinstance(objective, DiagonalWLS):
        raise TypeError("refine_by_pava requires a DiagonalWLS objective")
    theta = np.asarray(theta, dtype=float).ravel()
    vals, labels = np.unique(theta, return_inverse=True)
    q = len(vals)
    bw = np.bincount(labels, weights=objective.weights, minlength=q)
    bwz = np.bincount(labels, weights=objective.weights * objective.targets, minlength=q)
    pos = bw > 0
    fit = np.empty(q)
    fit[pos] = pava_fit(ChainProblem(bwz[pos] / bw[pos], bw[pos]))
    if not pos.all():
        lo = np.where(pos, fit, -np.inf)
        np.maximum.accumulate(lo, out=lo)
        hi = np.where(pos, fit, np.inf)
        hi = np.minimum.accumulate(hi[::-1])[::-1]
        free = ~pos
        fit[free] = np.clip(vals[free], lo[free], hi[free])
    if stats is not None:
        stats["subspace_solves"] = stats.get("subspace_solves", 0) + 1
        stats["used_pseudoinverse"] = stats.get("used_pseudoinverse", False) or bool((~pos).any())
    return fit[labels]


def _pick_strategy(objective, config: SolverConfig) -> str:
    if config.strategy is not None:
        strategy = config.strategy
    else:
        strategy = "pava" if isinstance(objective, DiagonalWLS) else "levels"
    if strategy == "pava" and not isinstance(objective, DiagonalWLS):
        raise ValueError("strategy 'pava' only applies to DiagonalWLS objectives")
    return strategy


def solve(objective, cone, config: SolverConfig | None = None, start=None) -> SolveResult:
    """Minimize a convex quadratic over an order cone.

    Parameters
    ----------
    objective : DiagonalWLS | PenalizedWLS | GeneralQuadratic
        The function to minimize; must be bounded below on the cone.
    cone : GridShape | QuotientConeSpec | ConstraintSet
        A grid shape selects the bimonotone cone with the O(r s) dynamic
        program as extremal minimizer; a quotient spec selects the
        collapsed cone; a plain constraint set falls back to exhaustive
        extremal enumeration (p <= 22).
    config : SolverConfig, optional
    start : array, optional
        Feasible warm start; by default the best constant vector.

    Returns a ``SolveResult`` whose certificate reports the optimality
    quantities at the final iterate.  Raises ``SolverError`` when the
    iteration budget is exhausted.
    """
    config = config or SolverConfig()
    ops = _cone_ops(cone)
    if objective.p != ops.p:
        raise ValueError(f"objective on {objective.p} variables, cone on {ops.p}")
    strategy = _pick_strategy(objective, config)
    if strategy == "graph":
        def refine(th, st):
            return refine_on_active_graph(objective, th, ops, st)
    elif strategy == "levels":
        def refine(th, st):
            return refine_on_levels(objective, th, st)
    else:
        def refine(th, st):
            return refine_by_pava(objective, th, st)

    stats = {"subspace_solves": 0, "used_pseudoinverse": False}
    p = ops.p
    if start is None:
        t0 = line_minimize(objective, np.zeros(p), np.ones(p))
        theta = np.full(p, t0)
        scale = max(1.0, np.abs(objective.gradient(theta)).max(initial=0.0))
    else:
        theta = np.asarray(start, dtype=float).ravel().copy()
        if len(theta) != p:
            raise ValueError(f"start must have {p} entries")
        if not is_feasible(theta, ops.constraints):
            raise ValueError("start must be feasible for the cone")
        scale = max(1.0, np.abs(objective.gradient(theta)).max(initial=0.0))
        theta = refine(theta, stats)

    eps = config.tol * scale
    max_outer = config.max_outer if config.max_outer is not None else 10 * p + 100
    trajectory = []
    converged = False
    outer = 0
    grad = objective.gradient(theta)
    while outer < max_outer:
        outer += 1
        direction, _ = ops.min_linear(grad)
        slope = float(grad @ direction)
        gdt = float(grad @ theta)
        gdo = float(grad.sum())
        trajectory.append((outer, float(objective.value(theta)), slope))
        if slope >= -eps and abs(gdt) <= eps and abs(gdo) <= eps:
            converged = True
            break
        if slope < -eps:
            t = line_minimize(objective, theta, direction)
            theta = theta + t * direction
        theta = refine(theta, stats)
        grad = objective.gradient(theta)
    if not converged:
        raise SolverError(
            f"no certificate after {max_outer} outer iterations "
            f"(last slope {trajectory[-1][2]:.3e}, eps {eps:.3e})",
            trajectory,
        )
    direction, _ = ops.min_linear(grad)
    certificate = Certificate(
        grad_dot_theta=float(grad @ theta),
        grad_dot_ones=float(grad.sum()),
        min_slope=float(grad @ direction),
        scale=scale,
        tol=config.tol,
    )
    return SolveResult(
        theta=theta,
        objective_value=float(objective.value(theta)),
        certificate=certificate,
        outer_iterations=outer,
        subspace_solves=stats["subspace_solves"],
        strategy=strategy,
        used_pseudoinverse=stats["used_pseudoinverse"],
        converged=converged,
    )
