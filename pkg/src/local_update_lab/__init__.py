"""Local update methods on quadratic models: exact surrogates, rates, frontiers."""

from .bounds import (
    DiscreteDistribution,
    KappaReport,
    delta_from_kappa,
    distance_bound,
    distance_bound_from_kappa,
    kappa_bound_fedavg,
    kappa_bound_maml,
    kappa_exact,
    mad,
    mad_bound,
    matrix_weighted_discrepancy,
    matrix_weighted_mean,
    phi,
    psi,
    rho_from_kappa,
    tightness_case_b2,
)
from .engine import (
    RunConfig,
    ServerOptSpec,
    Trajectory,
    auto_tune,
    auto_tune_for,
    client_update,
    client_update_maml,
    run,
    server_round,
)
from .frontier import (
    Frontier,
    FrontierPoint,
    SweepSpec,
    default_gamma_grid,
    default_k_grid,
    empirical_rate_crosscheck,
    frontier_subset_check,
    simulated_maml_sweep,
    sweep,
    symmetry_measure,
)
from .matrices import EigenDecomposition, SpectrumBounds, eigh, random_spd_with_spectrum
from .quadratics import (
    ClientModel,
    Population,
    QuadraticExample,
    WeightScheme,
    distortion_matrix,
    empirical_minimizer,
    load_population,
    loss_value,
    minimizer_distance,
    save_population,
    surrogate_gradient,
    surrogate_hessian,
    surrogate_loss_value,
    surrogate_minimizer,
)

__version__ = "0.1.0"

__all__ = [
    "ClientModel",
    "DiscreteDistribution",
    "EigenDecomposition",
    "Frontier",
    "FrontierPoint",
    "KappaReport",
    "Population",
    "QuadraticExample",
    "RunConfig",
    "ServerOptSpec",
    "SpectrumBounds",
    "SweepSpec",
    "Trajectory",
    "WeightScheme",
    "auto_tune",
    "auto_tune_for",
    "client_update",
    "client_update_maml",
    "default_gamma_grid",
    "default_k_grid",
    "delta_from_kappa",
    "distance_bound",
    "distance_bound_from_kappa",
    "distortion_matrix",
    "eigh",
    "empirical_minimizer",
    "empirical_rate_crosscheck",
    "frontier_subset_check",
    "kappa_bound_fedavg",
    "kappa_bound_maml",
    "kappa_exact",
    "load_population",
    "loss_value",
    "mad",
    "mad_bound",
    "matrix_weighted_discrepancy",
    "matrix_weighted_mean",
    "minimizer_distance",
    "phi",
    "psi",
    "random_spd_with_spectrum",
    "rho_from_kappa",
    "run",
    "save_population",
    "server_round",
    "simulated_maml_sweep",
    "surrogate_gradient",
    "surrogate_hessian",
    "surrogate_loss_value",
    "surrogate_minimizer",
    "sweep",
    "symmetry_measure",
    "tightness_case_b2",
]
