"""Independent reference solvers used to cross-check the package.

Everything here is built directly on cvxpy with constraint lists written
out longhand, deliberately not reusing the package's own constraint
builders, so that a bug in the package cannot hide in its own oracle.
"""

import numpy as np
import cvxpy as cp

OSQP_KW = dict(solver=cp.OSQP, eps_abs=1e-11, eps_rel=1e-11,
               max_iter=500000, polishing=True)


def _bimonotone_cons(th, r, s):
    cons = []
    for i in range(r - 1):
        cons.append(th[i + 1, :] >= th[i, :])
    for j in range(s - 1):
        cons.append(th[:, j + 1] >= th[:, j])
    return cons


def bimonotone_project(target, weights=None):
    """argmin sum w (th - target)^2 over matrices nondecreasing in i and j."""
    target = np.asarray(target, dtype=float)
    r, s = target.shape
    th = cp.Variable((r, s))
    if weights is None:
        obj = cp.sum_squares(th - target)
    else:
        w = np.asarray(weights, dtype=float)
        obj = cp.sum(cp.multiply(w, cp.square(th - target)))
    prob = cp.Problem(cp.Minimize(obj), _bimonotone_cons(th, r, s))
    prob.solve(**OSQP_KW)
    if th.value is None:
        raise RuntimeError(f"oracle failed: {prob.status}")
    return np.asarray(th.value)


def minimize_quadratic_bimonotone(hessian, linear, shape):
    """argmin 0.5 x'Ax + b'x over the bimonotone cone (A positive definite)."""
    r, s = shape
    A = np.asarray(hessian, dtype=float)
    b = np.asarray(linear, dtype=float).ravel()
    x = cp.Variable(r * s)
    th = cp.reshape(x, (r, s), order="C")
    obj = 0.5 * cp.quad_form(x, cp.psd_wrap(A)) + b @ x
    prob = cp.Problem(cp.Minimize(obj), _bimonotone_cons(th, r, s))
    prob.solve(**OSQP_KW)
    if x.value is None:
        raise RuntimeError(f"oracle failed: {prob.status}")
    return np.asarray(x.value).reshape(r, s)


def quotient_project(target, k, l):
    """Projection onto the cone with collapsed leading rows/columns.

    Constraints written straight from the definition: the first k rows
    are identical and their common value is nondecreasing over columns
    past the first l; symmetrically for the first l columns; the
    trailing block is nondecreasing in both directions.  The collapsed
    corner value is not ordered against either chain.
    """
    target = np.asarray(target, dtype=float)
    r, s = target.shape
    th = cp.Variable((r, s))
    cons = []
    for i in range(1, k):
        cons.append(th[i, :] == th[0, :])
    for j in range(1, l):
        cons.append(th[:, j] == th[:, 0])
    if k >= 1 and l >= 1:
        cons.append(th[0, 0] == th[k - 1, l - 1])
    for j in range(l, s - 1):
        cons.append(th[0, j] <= th[0, j + 1])
    for i in range(k, r - 1):
        cons.append(th[i, 0] <= th[i + 1, 0])
    for i in range(k, r - 1):
        cons.append(th[i + 1, l:] >= th[i, l:])
    for j in range(l, s - 1):
        cons.append(th[k:, j + 1] >= th[k:, j])
    prob = cp.Problem(cp.Minimize(cp.sum_squares(th - target)), cons)
    prob.solve(**OSQP_KW)
    if th.value is None:
        raise RuntimeError(f"oracle failed: {prob.status}")
    return np.asarray(th.value)


def project_pairs(target, weights, pairs):
    """Weighted projection onto {x : x[u] <= x[v] for (u, v) in pairs}."""
    target = np.asarray(target, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    x = cp.Variable(len(target))
    cons = [x[int(u)] <= x[int(v)] for u, v in pairs]
    prob = cp.Problem(cp.Minimize(cp.sum(cp.multiply(w, cp.square(x - target)))), cons)
    prob.solve(**OSQP_KW)
    if x.value is None:
        raise RuntimeError(f"oracle failed: {prob.status}")
    return np.asarray(x.value)
