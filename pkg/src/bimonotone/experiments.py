"""Seeded simulation experiments for the regression and denoising tools.

Two synthetic scenarios are provided, each with a signal on the unit
square sampled at cell midpoints x_i = (i - 0.5)/r, y_j = (j - 0.5)/s:

* binary: a bimonotone probability surface combining a linear trend
  with a jump along a cosine-shaped curve; Bernoulli observations on a
  random subset of cells, fitted by simple interpolation and by light
  regularization, scored by average absolute deviation from the truth.
* splash: a damped radial oscillation plus a weak linear trend, with
  additive standard Gaussian noise on every cell, denoised by basis
  shrinkage and scored by normalized squared loss.

Replicates draw from independent Philox streams spawned from a single
seed, so studies are reproducible and can run in worker processes
without coordination.  Summaries use compensated summation so results
do not depend on aggregation order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import SplineBasis, make_spline_basis
from .cones import GridShape
from .regression import aad, aggregate, fit_incomplete_regularized, fit_incomplete_simple
from .shrinkage import (
    empirical_loss,
    estimate_sigma,
    gamma_bimonotone,
    gamma_threshold,
    level_estimate,
)

__all__ = [
    "binary_signal",
    "simulate_binary",
    "BinaryStudy",
    "binary_study",
    "splash_signal",
    "simulate_splash",
    "SplashStudy",
    "splash_study",
    "sigma_loss_curve",
    "summarize",
    "DEFAULT_TAUS",
]

DEFAULT_TAUS = (0.5, 0.6, 1.0, 1.5, 2.0)


def _midpoints(n: int) -> np.ndarray:
    return (np.arange(1, n + 1) - 0.5) / n


def binary_signal(rows: int = 70, cols: int = 100) -> np.ndarray:
    """Success probabilities (x + y)/4 + 1{y >= 1/2 + cos(pi x)/4} / 2.

    Nondecreasing in both coordinates (the jump curve falls as x grows),
    with values in (0, 1).
    """
    x = _midpoints(rows)[:, None]
    y = _midpoints(cols)[None, :]
    return (x + y) / 4.0 + 0.5 * (y >= 0.5 + np.cos(np.pi * x) / 4.0)


def simulate_binary(rng: np.random.Generator, rows: int = 70, cols: int = 100,
                    n_keep: int = 700):
    """One replicate: Bernoulli draws on all cells, then a random subset kept.

    Returns (row_idx, col_idx, values, signal); indices are 0-based and
    sorted, values are the retained 0/1 observations.
    """
    theta = binary_signal(rows, cols)
    if not 1 <= n_keep <= rows * cols:
        raise ValueError("n_keep out of range")
    z = (rng.random((rows, cols)) < theta).astype(float)
    keep = np.sort(rng.choice(rows * cols, size=n_keep, replace=False))
    ri, ci = np.unravel_index(keep, (rows, cols))
    return ri, ci, z[ri, ci], theta


def _binary_replicate(args):
    child, rows, cols, n_keep, penalty = args
    rng = np.random.Generator(np.random.Philox(child))
    ri, ci, values, theta = simulate_binary(rng, rows, cols, n_keep)
    layout = aggregate(ri, ci, values, GridShape(rows, cols))
    fit_s = fit_incomplete_simple(layout)
    fit_r = fit_incomplete_regularized(layout, penalty)
    return aad(fit_s.theta, theta), aad(fit_r.theta, theta)


def summarize(values) -> dict:
    """Mean, sample standard deviation and standard error of the mean.

    Uses compensated summation, so the result is independent of the
    order in which replicates were collected.
    """
    vals = [float(v) for v in np.asarray(values, dtype=float).ravel()]
    n = len(vals)
    if n == 0:
        raise ValueError("no values to summarize")
    mean = math.fsum(vals) / n
    if n > 1:
        var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
        sd = math.sqrt(var)
        se = sd / math.sqrt(n)
    else:
        sd = float("nan")
        se = float("nan")
    return {"mean": mean, "sd": sd, "se": se, "n": n}


def _run_replicates(worker, arglist, jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(worker, arglist))
    return [worker(a) for a in arglist]


@dataclass
class BinaryStudy:
    seed: int
    rows: int
    cols: int
    n_keep: int
    penalty: float
    aad_simple: np.ndarray
    aad_lightreg: np.ndarray

    @property
    def reps(self) -> int:
        return len(self.aad_simple)

    def summary(self) -> dict:
        return {
            "simple": summarize(self.aad_simple),
            "lightreg": summarize(self.aad_lightreg),
        }


def binary_study(reps: int = 20, seed: int = 0, rows: int = 70, cols: int = 100,
                 n_keep: int = 700, penalty: float = 1e-4, jobs: int = 1) -> BinaryStudy:
    """Repeated binary-scenario fits; AAD per replicate for both modes."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    children = np.random.SeedSequence(seed).spawn(reps)
    args = [(c, rows, cols, n_keep, penalty) for c in children]
    out = _run_replicates(_binary_replicate, args, jobs)
    return BinaryStudy(
        seed=seed, rows=rows, cols=cols, n_keep=n_keep, penalty=penalty,
        aad_simple=np.array([a for a, _ in out]),
        aad_lightreg=np.array([b for _, b in out]),
    )


PHASE_SCALE = 44.0


def splash_signal(rows: int = 60, cols: int = 100) -> np.ndarray:
    """Damped radial oscillation 2 phase^{-1/4} sin(phase) + 0.05 (x + y).

    phase(x, y) = 44 sqrt(3 x^2 + 2 x y + 3 y^2) + 1 at cell midpoints,
    giving roughly seven rings across the unit square; the amplitude
    decays slowly away from the origin and a weak linear trend is added.
    """
    x = _midpoints(rows)[:, None]
    y = _midpoints(cols)[None, :]
    phase = PHASE_SCALE * np.sqrt(3.0 * x**2 + 2.0 * x * y + 3.0 * y**2) + 1.0
    return 2.0 * phase**-0.25 * np.sin(phase) + 0.05 * (x + y)


def simulate_splash(rng: np.random.Generator, rows: int = 60, cols: int = 100):
    """One replicate: signal plus unit Gaussian noise; returns (z, signal)."""
    mu = splash_signal(rows, cols)
    return mu + rng.standard_normal((rows, cols)), mu


@lru_cache(maxsize=8)
def _cached_basis(rows: int, cols: int, row_order: int, col_order: int) -> SplineBasis:
    return make_spline_basis(rows, cols, row_order, col_order)


def _splash_replicate(args):
    child, rows, cols, row_order, col_order, taus = args
    rng = np.random.Generator(np.random.Philox(child))
    z, mu = simulate_splash(rng, rows, cols)
    basis = _cached_basis(rows, cols, row_order, col_order)
    coef = basis.transform(z)
    coef_mu = basis.transform(mu)
    sigma = estimate_sigma(coef, 1.0, "rms").sigma
    eta = level_estimate(coef, row_order, col_order)
    gamma = gamma_bimonotone(coef, sigma, row_order, col_order, eta=eta)
    losses = [empirical_loss(gamma, coef, coef_mu)]
    for tau in taus:
        gt = gamma_threshold(coef, sigma, tau)
        losses.append(empirical_loss(gt, coef, coef_mu))
    return sigma, losses


@dataclass
class SplashStudy:
    seed: int
    rows: int
    cols: int
    row_order: int
    col_order: int
    taus: tuple
    sigma_hat: np.ndarray
    losses: dict

    @property
    def reps(self) -> int:
        return len(self.sigma_hat)

    @property
    def estimators(self) -> list:
        return ["bimonotone"] + [f"threshold:{t:g}" for t in self.taus]

    def summary(self) -> dict:
        out = {name: summarize(self.losses[name]) for name in self.estimators}
        out["sigma_hat"] = summarize(self.sigma_hat)
        return out


def splash_study(reps: int = 200, seed: int = 0, rows: int = 60, cols: int = 100,
                 row_order: int = 2, col_order: int = 2, taus=DEFAULT_TAUS,
                 jobs: int = 1) -> SplashStudy:
    """Monte Carlo comparison of bimonotone shrinkage and thresholding.

    Each replicate estimates the noise level from the high-frequency
    corner (rms, kappa = 1) and scores every estimator by normalized
    squared loss against the true signal.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    taus = tuple(float(t) for t in taus)
    children = np.random.SeedSequence(seed).spawn(reps)
    args = [(c, rows, cols, row_order, col_order, taus) for c in children]
    out = _run_replicates(_splash_replicate, args, jobs)
    sigma_hat = np.array([s for s, _ in out])
    table = np.array([l for _, l in out])
    losses = {"bimonotone": table[:, 0]}
    for i, tau in enumerate(taus):
        losses[f"threshold:{tau:g}"] = table[:, i + 1]
    return SplashStudy(
        seed=seed, rows=rows, cols=cols, row_order=row_order, col_order=col_order,
        taus=taus, sigma_hat=sigma_hat, losses=losses,
    )


def sigma_loss_curve(coef, coef_signal, eta, sigmas) -> np.ndarray:
    """Loss of the cone shrinker as a function of the assumed noise level.

    The level estimate eta does not depend on sigma, so the curve only
    reevaluates the closed-form gamma per grid point.  Returns the
    normalized squared losses.
    """
    return np.array([
        empirical_loss(gamma_bimonotone(coef, s, 0, 0, eta=eta), coef, coef_signal)
        for s in np.asarray(sigmas, dtype=float).ravel()
    ])
