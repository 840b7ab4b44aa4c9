"""Order-2 Carleman moment prediction for the stochastically forced van de Vusse reactor.

The package embeds the reactor's quadratic Ito SDE as a bilinear SDE on
the augmented state (x, pairwise products of x), propagates conditional
means and covariances with the resulting moment ODEs, and benchmarks the
prediction against a continuous-time EKF and seeded Monte Carlo
ensembles.
"""
from .carleman import (
    BilinearSystem,
    QuadraticSde,
    augmented_drift,
    build_vandevusse,
    dropped_cubic_terms,
    embed_order2,
    vandevusse_coefficients,
    write_blocks,
)
from .ekf import EkfState, ekf_predict, ekf_rhs
from .experiments import (
    ComparisonReport,
    Scenario,
    builtin_scenario,
    emit_charts,
    emit_csv,
    load_scenario,
    run_scenario,
)
from .kronecker import MonomialIndexMap, reduce_square, reduced_dim
from .model import (
    PARAM_SET1,
    PARAM_SET2,
    PhysicalState,
    ReactorParams,
    X0_SET1,
    X0_SET2,
    diffusion,
    drift,
    jacobian,
)
from .moments import (
    AugmentedMoments,
    IntegrationError,
    MomentSeries,
    PhysicalMoments,
    augmented_rhs,
    covariance_notion_gap,
    crosscheck_mean_paths,
    integrate,
    integrate_augmented,
    integrate_physical,
    ou_mean,
    ou_variance,
    physical_rhs,
)
from .montecarlo import (
    EnsembleStats,
    PathConfig,
    SimulationError,
    em_mean_reference,
    ensemble_moments,
    simulate_path,
    simulate_shared_noise,
    substream_seed,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedMoments",
    "BilinearSystem",
    "ComparisonReport",
    "EkfState",
    "EnsembleStats",
    "IntegrationError",
    "MomentSeries",
    "MonomialIndexMap",
    "PARAM_SET1",
    "PARAM_SET2",
    "PathConfig",
    "PhysicalMoments",
    "PhysicalState",
    "QuadraticSde",
    "ReactorParams",
    "Scenario",
    "SimulationError",
    "X0_SET1",
    "X0_SET2",
    "augmented_drift",
    "augmented_rhs",
    "build_vandevusse",
    "builtin_scenario",
    "covariance_notion_gap",
    "crosscheck_mean_paths",
    "diffusion",
    "drift",
    "dropped_cubic_terms",
    "ekf_predict",
    "ekf_rhs",
    "em_mean_reference",
    "embed_order2",
    "emit_charts",
    "emit_csv",
    "ensemble_moments",
    "integrate",
    "integrate_augmented",
    "integrate_physical",
    "jacobian",
    "load_scenario",
    "ou_mean",
    "ou_variance",
    "physical_rhs",
    "reduce_square",
    "reduced_dim",
    "run_scenario",
    "simulate_path",
    "simulate_shared_noise",
    "substream_seed",
    "vandevusse_coefficients",
    "write_blocks",
]
