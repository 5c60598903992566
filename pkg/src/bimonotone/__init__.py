"""Convex quadratic minimization under order constraints on grids.

The package solves min Q(theta) for smooth strictly convex quadratics Q
over order cones — in particular the cone of bimonotone r x s matrices
(nondecreasing along rows and columns) — via an active-set scheme whose
optimality certificates rest on a dynamic program over the cone's 0/1
extremal points.  On top of the solver sit bimonotone least squares
regression for complete and incomplete two-way layouts, and shrinkage
denoising of complete layouts in a tensor-product discrete spline
basis.  The ``bimonotone`` command line tool exposes fitting,
denoising, and reproducible simulation studies.
"""

from .basis import (
    Annihilator,
    BasisFactor,
    SplineBasis,
    build_annihilator,
    build_basis,
    make_spline_basis,
)
from .cones import (
    ConstraintSet,
    GridShape,
    LevelDecomposition,
    Partition,
    QuotientConeSpec,
    active_partition,
    bimonotone_constraints,
    extremals_bruteforce,
    is_feasible,
    level_decomposition,
    level_partition,
    step_length,
    step_length_complete,
)
from .dp import brute_min_linear, dp_min_linear, dp_tableau, min_linear_quotient
from .experiments import (
    BinaryStudy,
    SplashStudy,
    binary_signal,
    binary_study,
    sigma_loss_curve,
    simulate_binary,
    simulate_splash,
    splash_signal,
    splash_study,
    summarize,
)
from .io import (
    InputFormatError,
    atomic_write_bytes,
    atomic_write_text,
    config_hash,
    format_value,
    read_matrix_csv,
    read_observations_csv,
    write_json,
    write_manifest,
    write_matrix_csv,
    write_observations_csv,
    write_pgm,
)
from .objectives import (
    DiagonalWLS,
    GeneralQuadratic,
    PenalizedWLS,
    SubspaceSolveReport,
    line_minimize,
    minimize_over_partition,
)
from .pava import ChainProblem, pava_fit, pava_fit_grouped
from .regression import (
    FitResult,
    LayoutData,
    aad,
    aggregate,
    fit_complete,
    fit_incomplete_regularized,
    fit_incomplete_simple,
    fit_layout,
)
from .shrinkage import (
    DenoiseResult,
    NoiseEstimate,
    denoise,
    empirical_loss,
    estimate_sigma,
    fixed_gamma_risk,
    gamma_bimonotone,
    gamma_threshold,
    level_estimate,
    oracle_gamma,
    resolve_sigma,
    risk_estimate,
    sigma_scan,
)
from .solver import (
    Certificate,
    SolveResult,
    SolverConfig,
    SolverError,
    check_optimality,
    improve_step,
    refine_by_pava,
    refine_on_active_graph,
    refine_on_levels,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # cones
    "GridShape", "ConstraintSet", "QuotientConeSpec", "bimonotone_constraints",
    "is_feasible", "extremals_bruteforce", "LevelDecomposition",
    "level_decomposition", "Partition", "active_partition", "level_partition",
    "step_length", "step_length_complete",
    # dynamic program
    "dp_tableau", "dp_min_linear", "min_linear_quotient", "brute_min_linear",
    # objectives
    "DiagonalWLS", "PenalizedWLS", "GeneralQuadratic", "SubspaceSolveReport",
    "minimize_over_partition", "line_minimize",
    # pava
    "ChainProblem", "pava_fit", "pava_fit_grouped",
    # solver
    "SolverConfig", "Certificate", "SolveResult", "SolverError",
    "check_optimality", "improve_step", "refine_on_active_graph",
    "refine_on_levels", "refine_by_pava", "solve",
    # basis
    "Annihilator", "build_annihilator", "BasisFactor", "build_basis",
    "SplineBasis", "make_spline_basis",
    # shrinkage
    "NoiseEstimate", "estimate_sigma", "sigma_scan", "resolve_sigma",
    "gamma_threshold", "level_estimate", "gamma_bimonotone", "empirical_loss",
    "fixed_gamma_risk", "risk_estimate", "oracle_gamma", "DenoiseResult",
    "denoise",
    # regression
    "LayoutData", "aggregate", "FitResult", "fit_complete",
    "fit_incomplete_simple", "fit_incomplete_regularized", "fit_layout", "aad",
    # experiments
    "binary_signal", "simulate_binary", "BinaryStudy", "binary_study",
    "splash_signal", "simulate_splash", "SplashStudy", "splash_study",
    "sigma_loss_curve", "summarize",
    # io
    "InputFormatError", "atomic_write_bytes", "atomic_write_text",
    "format_value", "read_matrix_csv", "write_matrix_csv",
    "read_observations_csv", "write_observations_csv", "write_pgm",
    "write_json", "config_hash", "write_manifest",
]
