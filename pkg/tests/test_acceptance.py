"""Acceptance gate: one test per headline guarantee, at pinned tolerances.

Each test exercises the released behavior end to end and records a
PASS/FAIL line in the terminal summary (see conftest).  Statistical
criteria use fixed seeds so reruns are deterministic.
"""

import math
import time

import numpy as np
import scipy.special

from bimonotone import (
    ChainProblem,
    DiagonalWLS,
    GridShape,
    PenalizedWLS,
    SolverConfig,
    aggregate,
    binary_study,
    dp_min_linear,
    estimate_sigma,
    extremals_bruteforce,
    fit_incomplete_simple,
    level_decomposition,
    level_estimate,
    make_spline_basis,
    pava_fit,
    sigma_scan,
    simulate_splash,
    solve,
    splash_study,
)
from bimonotone.cones import bimonotone_constraints

from _oracles import quotient_project


def random_wls(rng, max_rows=20, max_cols=20):
    r = int(rng.integers(2, max_rows + 1))
    s = int(rng.integers(2, max_cols + 1))
    shape = GridShape(r, s)
    z = rng.normal(size=r * s) * rng.uniform(0.5, 3.0)
    w = rng.uniform(0.2, 2.0, r * s)
    return shape, DiagonalWLS(weights=w, targets=z)


def test_dp_value_matches_extremal_enumeration(acceptance_record, rng):
    t0 = time.perf_counter()
    worst = 0.0
    n = 0
    for r in range(1, 5):
        for s in range(1, 5):
            extremals = extremals_bruteforce(bimonotone_constraints(GridShape(r, s)))
            coeffs = rng.standard_normal((1000, r * s))
            brute = (coeffs @ extremals.T).min(axis=1)
            for a, ref in zip(coeffs, brute):
                _, val = dp_min_linear(a.reshape(r, s))
                worst = max(worst, abs(val - ref))
                n += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10.0
    acceptance_record(
        "dp-oracle-equivalence", ok,
        f"max value gap {worst:.2e} over {n} problems in {elapsed:.1f} s",
    )
    assert worst <= 1e-12
    assert elapsed < 10.0


def test_extremal_family_count(acceptance_record):
    bad = []
    for r in range(1, 5):
        for s in range(1, 5):
            count = len(extremals_bruteforce(bimonotone_constraints(GridShape(r, s))))
            expected = int(scipy.special.comb(r + s, r, exact=True))
            if count != expected:
                bad.append((r, s, count, expected))
    acceptance_record(
        "extremal-count", not bad,
        "binomial(r+s, r) matched for all r,s <= 4" if not bad else f"mismatches: {bad}",
    )
    assert not bad


def test_wls_solutions_carry_valid_certificates(acceptance_record, rng):
    t0 = time.perf_counter()
    worst_ratio = 0.0  # violation / (tol * scale), should stay <= 1
    for _ in range(200):
        shape, objective = random_wls(rng)
        res = solve(objective, shape)
        cert = res.certificate
        eps = cert.tol * cert.scale
        violation = max(abs(cert.grad_dot_theta), abs(cert.grad_dot_ones),
                        max(0.0, -cert.min_slope))
        worst_ratio = max(worst_ratio, violation / eps)
        assert res.converged
    elapsed = time.perf_counter() - t0
    ok = worst_ratio <= 1.0 and elapsed < 60.0
    acceptance_record(
        "optimality-certificate", ok,
        f"200 WLS up to 20x20; worst violation {worst_ratio:.3f} of the "
        f"1e-8*scale budget in {elapsed:.1f} s",
    )
    assert worst_ratio <= 1.0
    assert elapsed < 60.0


def test_refinement_strategies_agree(acceptance_record, rng):
    worst_wls = 0.0
    for _ in range(200):
        shape, objective = random_wls(rng, 14, 14)
        thetas = [
            solve(objective, shape, SolverConfig(strategy=st)).theta
            for st in ("graph", "levels", "pava")
        ]
        worst_wls = max(worst_wls,
                        np.abs(thetas[0] - thetas[1]).max(),
                        np.abs(thetas[0] - thetas[2]).max())
    worst_pen = 0.0
    for _ in range(50):
        r = int(rng.integers(2, 9))
        s = int(rng.integers(2, 11))
        shape = GridShape(r, s)
        w = rng.uniform(0.0, 2.0, r * s)
        w[rng.random(r * s) < 0.3] = 0.0
        if not w.any():
            w[0] = 1.0
        objective = PenalizedWLS(w, rng.normal(size=r * s), 0.05, shape)
        a = solve(objective, shape, SolverConfig(strategy="graph")).theta
        b = solve(objective, shape, SolverConfig(strategy="levels")).theta
        worst_pen = max(worst_pen, np.abs(a - b).max())
    ok = worst_wls <= 1e-7 and worst_pen <= 1e-7
    acceptance_record(
        "strategy-agreement", ok,
        f"graph/levels/pava gap {worst_wls:.2e} on 200 WLS; "
        f"graph/levels gap {worst_pen:.2e} on 50 penalized",
    )
    assert worst_wls <= 1e-7
    assert worst_pen <= 1e-7


def test_two_point_plateau_recovered_exactly(acceptance_record):
    layout = aggregate([1, 5], [2, 6], [0.0, 1.0], GridShape(7, 10))
    fit = fit_incomplete_simple(layout)
    plateau = np.full((7, 10), 0.5)
    plateau[:2, :3] = 0.0
    plateau[5:, 6:] = 1.0
    exact = np.array_equal(fit.theta, plateau)
    acceptance_record(
        "two-point-plateau", exact,
        "7x10 two-observation fit equals the 0 / 0.5 / 1 plateau bitwise"
        if exact else f"max gap {np.abs(fit.theta - plateau).max():.2e}",
    )
    assert exact


def test_binary_scenario_average_deviation(acceptance_record):
    t0 = time.perf_counter()
    study = binary_study(reps=20, seed=0)
    elapsed = time.perf_counter() - t0
    mean_simple = study.summary()["simple"]["mean"]
    mean_light = study.summary()["lightreg"]["mean"]
    in_band = 0.05 < mean_simple < 0.10 and 0.05 < mean_light < 0.10
    ordered = mean_light <= mean_simple + 0.002
    ok = in_band and ordered and elapsed < 300.0
    acceptance_record(
        "binary-study", ok,
        f"mean AAD simple {mean_simple:.4f}, lightreg {mean_light:.4f} "
        f"(20 reps, {elapsed:.0f} s)",
    )
    assert in_band
    assert ordered
    assert elapsed < 300.0


def test_splash_scenario_risk_table(acceptance_record):
    t0 = time.perf_counter()
    study = splash_study(reps=200, seed=0, taus=(0.6, 1.0, 2.0))
    elapsed = time.perf_counter() - t0
    summary = study.summary()
    mean_bi = summary["bimonotone"]["mean"]
    targets = {"threshold:0.6": 0.0888, "threshold:1": 0.1044, "threshold:2": 0.1619}
    thr_ok = all(abs(summary[k]["mean"] - v) <= 0.015 for k, v in targets.items())
    beats = all(mean_bi < summary[k]["mean"] for k in targets)
    bi_ok = abs(mean_bi - 0.079) <= 0.010
    ok = bi_ok and beats and thr_ok and elapsed < 1200.0
    detail = (
        f"bimonotone {mean_bi:.4f}; "
        + ", ".join(f"tau {k.split(':')[1]} -> {summary[k]['mean']:.4f}" for k in targets)
        + f" (200 reps, {elapsed:.0f} s)"
    )
    acceptance_record("splash-study", ok, detail)
    assert bi_ok
    assert beats
    assert thr_ok
    assert elapsed < 1200.0


def test_level_estimate_matches_dense_qp(acceptance_record, rng):
    worst = 0.0
    for shape in ((3, 3), (4, 4)):
        for _ in range(50):
            coef = rng.normal(size=shape) * rng.uniform(0.5, 2.0)
            eta = level_estimate(coef, 1, 1)
            ref = -quotient_project(-(coef**2), 1, 1)
            worst = max(worst, np.abs(eta - ref).max())
    ok = worst <= 1e-8
    acceptance_record(
        "shrinkage-qp-oracle", ok,
        f"max gap to dense projected QP {worst:.2e} over 100 trials",
    )
    assert worst <= 1e-8


def test_noise_level_recovery(acceptance_record):
    basis = make_spline_basis(100, 100, 2, 2)
    hits = 0
    for trial in range(100):
        rng = np.random.default_rng(1000 + trial)
        coef = basis.transform(rng.standard_normal((100, 100)))
        sigma = estimate_sigma(coef, kappa=1.0, method="rms").sigma
        hits += 0.95 < sigma < 1.05
    rng = np.random.default_rng(0)
    z, _ = simulate_splash(rng)
    coef = make_spline_basis(60, 100, 2, 2).transform(z)
    kappas = np.linspace(0.51, 0.64, 14)
    gap_rms = np.abs(sigma_scan(coef, kappas, "rms") - 1.0).min()
    gap_mad = np.abs(sigma_scan(coef, kappas, "mad") - 1.0).min()
    scan_ok = gap_rms <= 0.1 and gap_mad <= 0.1
    ok = hits >= 99 and scan_ok
    acceptance_record(
        "noise-estimation", ok,
        f"{hits}/100 pure-noise estimates in (0.95, 1.05); scan gaps "
        f"rms {gap_rms:.3f}, mad {gap_mad:.3f} on kappa in (0.5, 0.65)",
    )
    assert hits >= 99
    assert scan_ok


def test_core_invariant_suites(acceptance_record, rng):
    checks = []

    worst = 0.0
    for _ in range(25):
        r, s = rng.integers(2, 7, size=2)
        x = np.cumsum(rng.uniform(0, 1, r))[:, None] + np.cumsum(rng.uniform(0, 1, s))[None, :]
        x = x.ravel()
        dec = level_decomposition(x)
        scale = max(1.0, np.abs(x).max())
        worst = max(worst, np.abs(dec.reconstruct() - x).max() / scale)
    checks.append(("level reconstruction", worst, 1e-14))

    worst = 0.0
    exact_idempotent = True
    for _ in range(25):
        z = rng.normal(size=30)
        w = rng.uniform(0.2, 2.0, 30)
        fit = pava_fit(ChainProblem(z, w))
        exact_idempotent &= np.array_equal(pava_fit(ChainProblem(fit, w)), fit)
        shifted = pava_fit(ChainProblem(2.5 * z + 1.25, w))
        worst = max(worst, np.abs(shifted - (2.5 * fit + 1.25)).max())
    checks.append(("pava equivariance", worst, 1e-12))

    worst = 0.0
    shape = GridShape(5, 6)
    w = np.ones(30)
    for _ in range(25):
        z1 = rng.normal(size=30)
        z2 = z1 + rng.normal(size=30) * rng.uniform(0.01, 2.0)
        p1 = solve(DiagonalWLS(w, z1), shape).theta
        p2 = solve(DiagonalWLS(w, z2), shape).theta
        gap = np.linalg.norm(p1 - p2) - np.linalg.norm(z1 - z2)
        worst = max(worst, gap / max(1.0, np.linalg.norm(z1 - z2)))
    checks.append(("projection non-expansive", worst, 1e-10))

    basis = make_spline_basis(9, 11, 2, 2)
    worst = 0.0
    for _ in range(25):
        z = rng.normal(size=(9, 11)) * 3
        worst = max(worst, np.abs(basis.inverse_transform(basis.transform(z)) - z).max())
    checks.append(("transform round trip", worst, 1e-12))

    worst = 0.0
    for _ in range(10):
        shape, objective = random_wls(rng, 5, 5)
        theta = rng.normal(size=shape.size)
        grad = objective.gradient(theta)
        h = 1e-6
        for idx in range(shape.size):
            step = np.zeros(shape.size)
            step[idx] = h
            fd = (objective.value(theta + step) - objective.value(theta - step)) / (2 * h)
            denom = max(1.0, abs(fd))
            worst = max(worst, abs(grad[idx] - fd) / denom)
    checks.append(("gradient vs finite differences", worst, 1e-6))

    failures = [name for name, got, bound in checks if got > bound]
    ok = exact_idempotent and not failures
    detail = "; ".join(f"{name} {got:.1e} (<= {bound:g})" for name, got, bound in checks)
    if not exact_idempotent:
        detail += "; pava idempotence NOT exact"
    acceptance_record("property-suites", ok, detail)
    assert exact_idempotent
    assert not failures
