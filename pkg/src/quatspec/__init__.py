"""Quaternionic Green's functions and spectral densities of non-Hermitian
random matrices: finite-N evaluation, universal sum/product self-consistency
solvers, and Monte Carlo verification experiments."""

from .quaternion import Quaternion, q_dot, q_inv, q_mul, q_norm
from .linalg import build_doubled, eigenvalues, solve_doubled, spectral_norm
from .greens import green, normal_smoothing, perturbation_mc, rho_eps
from .ensembles import (
    DeterministicFamily,
    EnsembleSpec,
    GreenEvaluator,
    cauchy_limit_green,
    family_green_evaluators,
    green_of_diagonal,
    make_deterministic,
    sample_random,
    sample_ratio,
    sample_stephanov,
)
from .laws import (
    SolveConfig,
    SolveResult,
    cauchy_product_density,
    elliptic_density,
    nu_gamma,
    predict_density,
    predict_density_grid,
    solve_product,
    solve_sum,
    spherical_density,
    stephanov_density,
)

__version__ = "0.1.0"

__all__ = [
    "Quaternion",
    "q_mul",
    "q_inv",
    "q_dot",
    "q_norm",
    "build_doubled",
    "solve_doubled",
    "eigenvalues",
    "spectral_norm",
    "green",
    "rho_eps",
    "normal_smoothing",
    "perturbation_mc",
    "EnsembleSpec",
    "DeterministicFamily",
    "GreenEvaluator",
    "sample_random",
    "sample_ratio",
    "sample_stephanov",
    "make_deterministic",
    "green_of_diagonal",
    "cauchy_limit_green",
    "family_green_evaluators",
    "SolveConfig",
    "SolveResult",
    "solve_sum",
    "solve_product",
    "predict_density",
    "predict_density_grid",
    "elliptic_density",
    "stephanov_density",
    "cauchy_product_density",
    "nu_gamma",
    "spherical_density",
    "__version__",
]
