"""Numerics for the symmetric binary perceptron at its satisfiability threshold."""

__version__ = "0.1.0"

from .analytic import (  # noqa: F401
    FreeEnergyProfile,
    ModelParams,
    ShapeVerdict,
    alpha_c,
    free_energy,
    free_energy_profile,
    free_energy_second_deriv_half,
    gauss_p,
    k_c,
    l_curve,
    log_expected_solutions,
    mu2,
    mu2_integral,
    pair_q,
    perturbation_equivalence,
    verify_shape,
)
from .errors import (  # noqa: F401
    AccuracyError,
    BudgetError,
    ConfigError,
    DomainError,
    MissingDataError,
    SbpError,
)
from .moments import (  # noqa: F401
    EndpointDecayReport,
    MomentRatioReport,
    q_endpoint_decay,
    ratio_exact,
    ratio_monotone_in_alpha,
    ratio_totals_sorted,
)
from .cube import (  # noqa: F401
    MAX_EXACT_N,
    RNG_TRANSFORM,
    CapacityTrace,
    Instance,
    SolveReport,
    count_solutions,
    exact_objective,
    generate_instance,
    regularity_statistic,
    run_capacity,
    solve_exact,
)
from .experiments import (  # noqa: F401
    EXPERIMENT_KINDS,
    ExperimentConfig,
    ExperimentReport,
    WindowReport,
    clear_disc_cache,
    run_anticoncentration,
    run_capacity_experiment,
    run_experiment,
    run_martingale,
    run_success_at_kc,
    run_tail_lower,
    run_window,
    wilson_interval,
)
