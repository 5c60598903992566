"""Shrinkage denoising of two-way layouts in a discrete spline basis.

A noisy matrix Z = Xi + sigma * noise is expanded in a tensor-product
spline basis, the coefficients are multiplied by a data-driven shrinkage
matrix gamma in [0, 1], and the result is mapped back.  Because the
basis is orthonormal, the mean squared error equals the coefficient
-domain loss mean((gamma * C - C_signal)^2) (Parseval), which the tools
below exploit for risk computations.

Two shrinkers are provided:

* hard-ish thresholding  gamma = (1 - tau log(p) sigma^2 / C^2)_+ ,
* bimonotone shrinkage   gamma = (1 - sigma^2 / eta)_+  with eta the
  signed projection of the squared coefficients onto the order cone
  that matches the basis blocks (constant over the polynomial block,
  and decaying no faster than bimonotonically over the interaction
  block after flipping signs).  Estimated squared signal levels eta
  inherit the cone's order exactly, and the map eta -> gamma is
  monotone even in floating point, so gamma itself lies in the cone.

The noise scale can be estimated from the high-frequency corner of the
coefficient array, where smooth signals contribute little energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import SplineBasis, make_spline_basis
from .objectives import DiagonalWLS
from .solver import SolverConfig, solve

__all__ = [
    "NORMAL_QUARTILE",
    "NoiseEstimate",
    "estimate_sigma",
    "sigma_scan",
    "resolve_sigma",
    "gamma_threshold",
    "level_estimate",
    "gamma_bimonotone",
    "empirical_loss",
    "fixed_gamma_risk",
    "risk_estimate",
    "oracle_gamma",
    "DenoiseResult",
    "denoise",
]

# third quartile of the standard normal; |N(0,1)| has this median
NORMAL_QUARTILE = 0.674489750196082


@dataclass(frozen=True)
class NoiseEstimate:
    sigma: float
    method: str
    kappa: float | None
    n_cells: int


def _corner_mask(shape, kappa: float) -> np.ndarray:
    """High-frequency region {(i, j) : i/r + j/s >= kappa}, 1-based."""
    r, s = shape
    i = np.arange(1, r + 1)[:, None] / r
    j = np.arange(1, s + 1)[None, :] / s
    return i + j >= kappa

def estimate_sigma(coef, kappa: float = 1.0, method: str = "rms") -> NoiseEstimate:
    """Noise scale from coefficients in the high-frequency corner.

    method "rms": root mean square of the selected coefficients;
    method "mad": median absolute value divided by the normal quartile.
    Both are consistent when the corner carries noise only.
    """
    coef = np.asarray(coef, dtype=float)
    mask = _corner_mask(coef.shape, kappa)
    cells = coef[mask]
    if cells.size == 0:
        raise ValueError(f"no coefficients in the corner region at kappa={kappa}")
    if method == "rms":
        sigma = float(np.sqrt(np.mean(cells**2)))
    elif method == "mad":
        sigma = float(np.median(np.abs(cells)) / NORMAL_QUARTILE)
    else:
        raise ValueError(f"unknown noise estimator {method!r}")
    return NoiseEstimate(sigma=sigma, method=method, kappa=kappa, n_cells=int(cells.size))


def sigma_scan(coef, kappas, method: str = "rms") -> np.ndarray:
    """Noise estimates across a grid of corner sizes (diagnostic)."""
    return np.array([estimate_sigma(coef, k, method).sigma for k in kappas])


def resolve_sigma(spec: str, coef) -> NoiseEstimate:
    """Parse a noise specification against a coefficient array.

    Accepted forms:
      "auto1:KAPPA"  root-mean-square estimate on the corner region,
      "auto2:KAPPA"  median-absolute estimate on the corner region,
      "fixed:VALUE"  use VALUE directly,
      "scale:C"      C times the rms estimate at kappa = 1.
    """
    kind, _, arg = spec.partition(":")
    if not arg:
        raise ValueError(f"noise spec {spec!r} needs a ':' argument")
    try:
        value = float(arg)
    except ValueError as exc:
        raise ValueError(f"bad numeric argument in noise spec {spec!r}") from exc
    if kind == "auto1":
        return estimate_sigma(coef, value, "rms")
    if kind == "auto2":
        return estimate_sigma(coef, value, "mad")
    if kind == "fixed":
        if value <= 0:
            raise ValueError("fixed noise level must be positive")
        return NoiseEstimate(sigma=value, method="fixed", kappa=None, n_cells=0)
    if kind == "scale":
        if value <= 0:
            raise ValueError("noise scale factor must be positive")
        base = estimate_sigma(coef, 1.0, "rms")
        return NoiseEstimate(
            sigma=value * base.sigma, method="scale", kappa=1.0, n_cells=base.n_cells
        )
    raise ValueError(f"unknown noise spec kind {kind!r}")


def gamma_threshold(coef, sigma: float, tau: float) -> np.ndarray:
    """Soft-clipped threshold shrinkage factors.

    gamma = (1 - tau log(p) sigma^2 / C^2)_+ elementwise, with p the
    total number of cells; coefficients equal to zero get gamma 0.
    """
    coef = np.asarray(coef, dtype=float)
    p = coef.size
    sq = coef**2
    out = np.zeros_like(coef)
    np.divide(tau * np.log(p) * sigma**2, sq, out=out, where=sq > 0)
    return np.clip(1.0 - out, 0.0, 1.0) * (sq > 0)


def level_estimate(coef, head_rows: int, head_cols: int,
                   config: SolverConfig | None = None) -> np.ndarray:
    """Signed squared-signal levels respecting the coefficient order.

    Returns eta = -argmin ||x - (-C^2)||^2 over the quotient cone with
    the given collapsed heads; equivalently eta is the antitonic
    (order-reversed) least squares fit to the squared coefficients.
    Large entries mark coefficients worth keeping.
    """
    coef = np.asarray(coef, dtype=float)
    basis_cone = _quotient_cone(coef.shape, head_rows, head_cols)
    objective = DiagonalWLS(np.ones(coef.size), -(coef.ravel() ** 2))
    result = solve(objective, basis_cone, config)
    return -result.theta.reshape(coef.shape)


def _quotient_cone(shape, head_rows, head_cols):
    from .cones import QuotientConeSpec

    return QuotientConeSpec(shape[0], shape[1], head_rows, head_cols)


def gamma_bimonotone(coef, sigma: float, head_rows: int, head_cols: int,
                     eta: np.ndarray | None = None) -> np.ndarray:
    """Cone-constrained shrinkage factors (1 - sigma^2 / eta)_+.

    eta may be passed in when already computed; entries with eta <= 0
    get gamma 0.  The returned gamma inherits the coefficient order
    cone exactly: x -> (1 - sigma^2/x)_+ is nondecreasing, also under
    floating point rounding, and maps equal entries to equal values.
    """
    coef = np.asarray(coef, dtype=float)
    if eta is None:
        eta = level_estimate(coef, head_rows, head_cols)
    gamma = np.zeros_like(coef)
    pos = eta > 0
    np.divide(sigma**2, eta, out=gamma, where=pos)
    gamma = np.clip(1.0 - gamma, 0.0, 1.0) * pos
    return gamma


def empirical_loss(gamma, coef_noisy, coef_signal) -> float:
    """Realized loss mean((gamma * C - C_signal)^2) in coefficient space.

    By orthonormality this equals the mean squared error of the
    reconstructed matrix.
    """
    gamma = np.asarray(gamma, dtype=float)
    diff = gamma * np.asarray(coef_noisy, dtype=float) - np.asarray(coef_signal, dtype=float)
    return float(np.mean(diff**2))


def fixed_gamma_risk(gamma, coef_signal, sigma: float) -> float:
    """Exact risk of a deterministic shrinker on Gaussian noise.

    E mean((gamma (C + sigma eps) - C)^2) = mean(gamma^2 sigma^2
    + (1 - gamma)^2 C^2) for fixed gamma.
    """
    gamma = np.asarray(gamma, dtype=float)
    xi = np.asarray(coef_signal, dtype=float)
    return float(np.mean(gamma**2 * sigma**2 + (1.0 - gamma) ** 2 * xi**2))


def risk_estimate(gamma, coef_noisy, sigma: float) -> float:
    """Plug-in risk estimate mean(sigma^2 gamma^2 + (1-gamma)^2 (C^2 - sigma^2)).

    Unbiased for ``fixed_gamma_risk`` at the true noise level since
    E C^2 = C_signal^2 + sigma^2 componentwise.
    """
    gamma = np.asarray(gamma, dtype=float)
    sq = np.asarray(coef_noisy, dtype=float) ** 2
    return float(np.mean(sigma**2 * gamma**2 + (1.0 - gamma) ** 2 * (sq - sigma**2)))


def oracle_gamma(coef_signal, sigma: float) -> np.ndarray:
    """Risk-optimal unconstrained factors C^2 / (C^2 + sigma^2)."""
    sq = np.asarray(coef_signal, dtype=float) ** 2
    return sq / (sq + sigma**2)


@dataclass
class DenoiseResult:
    """Everything produced by one denoising run."""

    basis: SplineBasis
    coef: np.ndarray
    noise: NoiseEstimate
    eta: np.ndarray | None
    gammas: dict = field(default_factory=dict)
    fitted: dict = field(default_factory=dict)


def denoise(z, row_order: int = 2, col_order: int = 2,
            sigma: str | NoiseEstimate = "auto1:1.0",
            taus=(), bimonotone: bool = True,
            basis: SplineBasis | None = None) -> DenoiseResult:
    """Denoise a complete two-way layout.

    Builds (or reuses) the tensor-product basis, estimates the noise
    scale per ``sigma`` (see ``resolve_sigma``), and computes the
    bimonotone shrinkage estimate plus one thresholding estimate per
    entry of ``taus``.  Fitted matrices are keyed 'bimonotone' and
    'threshold:TAU'.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise ValueError("expected a 2-d array")
    if basis is None:
        basis = make_spline_basis(z.shape[0], z.shape[1], row_order, col_order)
    elif basis.shape != z.shape:
        raise ValueError(f"basis shape {basis.shape} does not match data {z.shape}")
    coef = basis.transform(z)
    noise = sigma if isinstance(sigma, NoiseEstimate) else resolve_sigma(sigma, coef)
    result = DenoiseResult(basis=basis, coef=coef, noise=noise, eta=None)
    k, l = basis.row.order, basis.col.order
    if bimonotone:
        result.eta = level_estimate(coef, k, l)
        g = gamma_bimonotone(coef, noise.sigma, k, l, eta=result.eta)
        result.gammas["bimonotone"] = g
        result.fitted["bimonotone"] = basis.inverse_transform(g * coef)
    for tau in taus:
        g = gamma_threshold(coef, noise.sigma, tau)
        key = f"threshold:{tau:g}"
        result.gammas[key] = g
        result.fitted[key] = basis.inverse_transform(g * coef)
    return result
