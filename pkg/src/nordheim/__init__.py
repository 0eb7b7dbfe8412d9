"""Deterministic simulator for the isotropic quantum Boltzmann (Nordheim)
equation for Bose-Einstein particles with balanced interaction potentials."""

from .collision_kernel import (
    KernelTensor,
    QuadratureSpec,
    build_tensor,
    load_tensor,
    save_tensor,
    verify_kernel_inequalities,
    w_boundary,
    w_hard_sphere,
    w_point,
    w_point_many,
    y_star,
)
from .equilibrium import (
    BoseEinsteinEquilibrium,
    bose_g,
    discrete_equilibrium_state,
    discretize_equilibrium,
    equilibrium_density,
    solve_equilibrium,
    zeta,
)
from .errors import (
    CacheMissError,
    ConfigError,
    DomainError,
    FormatError,
    GridMismatchError,
    ModelError,
    NordheimError,
    NumericsError,
    SizingError,
)
from .measure import (
    DiagnosticsRecord,
    DistributionState,
    EnergyGrid,
    condensate_indicator,
    entropy,
    entropy_dissipation,
    l1_distance,
    moment,
    norm_k,
    seminorm_1,
    state_from_function,
    temperature_ratio,
)
from .potentials import (
    LowerBound,
    PotentialKind,
    PotentialModel,
    ValidationReport,
    big_phi,
    check_assumption,
    compute_q1,
    eta_rational,
    hard_sphere,
    phi_hat,
    satisfies_assumption,
    tabulated,
)
from .solver import (
    Scheme,
    SolverConfig,
    Trajectory,
    collision,
    gain,
    loss_rate,
    run,
    step_duhamel,
    step_euler,
    suggest_dt,
)
from .verification import (
    BoundReport,
    BoundSample,
    StabilityReport,
    check_conservation,
    check_convergence_to_equilibrium,
    check_entropy,
    check_linf,
    check_negative_moment,
    check_non_condensation,
    entropy_floor_report,
    moment_production_report,
    negative_moment_constants,
    non_condensation_rate,
    non_condensation_slack_coefficient,
    psi_modulus,
    stability_experiment,
    stability_ordering,
)

__version__ = "0.1.0"
