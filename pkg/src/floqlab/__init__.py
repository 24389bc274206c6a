"""floqlab: desk-scale perturbation theory for driven Floquet spectra.

The library tracks one eigenvalue of K + beta*V, where K has a pure-point
spectrum omega*Z + {E_k} that is dense on the line, through truncated-window
computations: frequency selection, critical-index reduction, series
coefficients via rooted-tree combinatorics, the reduced eigenvector solver,
the implicit eigenvalue equation, and domain-density scans.
"""

from .diophantine import (
    DiophantineProfile,
    ExponentChoice,
    build_profile,
    density_witness,
    gamma_estimate,
    omega_stability_report,
    select_exponents,
    translate_density_scan,
)
from .eigenlab import (
    DomainScan,
    EigenResult,
    FitResult,
    FixedPointResult,
    TruncatedOperator,
    asymptotic_fit,
    assemble,
    domain_scan,
    eigen_check,
    eigenpair_track,
    fixed_point_lambda,
    measure_bound_check,
)
from .errors import (
    ConditioningError,
    ConfigError,
    ContractionError,
    DomainError,
    FloqlabError,
    HermiticityError,
    InequalityError,
    ModelRangeError,
    ResonanceError,
    SmoothnessError,
    TrackingError,
    WitnessError,
)
from .perturbation import (
    FourierPerturbation,
    MatrixSlice,
    band_perturbation,
    build_slice,
    counterexample_perturbation,
    cutoff_covariance,
    cutoff_mean_estimate,
    decay_check,
    divergence_partial_sum,
    matrix_entry,
    schur_norm,
    xi_weight,
)
from .presets import (
    GOLDEN_RATIO,
    default_grid,
    default_model,
    default_perturbation,
    default_profile,
)
from .reduction import (
    C_g,
    CriticalSet,
    G_value,
    ReducedState,
    ReductionWork,
    W_slice,
    assemble_reduced_state,
    critical_set,
    distance_checks,
    domain_condition,
    projector_bounds,
    solve_eigenvector,
    v_n,
    w_n,
    zeta_fn,
)
from .rs_series import (
    RootedTree,
    RSExpansion,
    compose_trees,
    decompose_tree,
    enumerate_trees,
    rs_recursive,
    rs_tree_formula,
    tail_diagnostic,
)
from .spectrum import (
    FloquetGrid,
    LatticeIndex,
    SpectrumModel,
    TruncationWindow,
    decompose_spectrum,
    detunings,
    floquet_value,
    gap_check,
    geometric_spectrum,
    multiplicative_check,
    pairwise_gap_bound,
    power_spectrum,
    table_spectrum,
)

__version__ = "0.1.0"
