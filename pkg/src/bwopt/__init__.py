"""Gaussian averaging on the Bures-Wasserstein manifold.

Covariance geometry primitives, Riemannian gradient descent for Wasserstein
barycenters (plain, stochastic, entropically regularized) and smoothed
geometric medians, projected Euclidean baselines, dataset generators, and a
semidefinite-programming export of the barycenter problem.
"""

from .geometry import (
    GaussianMeasure,
    NumericalError,
    SpdMatrix,
    TangentMap,
    bures_exp,
    bures_log,
    clip_eigenvalues,
    generalized_geodesic_point,
    geodesic_point,
    geometric_mean,
    kl_to_standard,
    matrix_sqrt,
    project_spectrum,
    tangent_norm,
    transport_and_w2sq,
    transport_map,
    w2_squared,
)
from .barycenter import (
    ConditionDiagnostics,
    ConvergenceTrace,
    DiscreteDistribution,
    SolverConfig,
    StepSchedule,
    TraceRecord,
    bary_gd_step,
    bary_gradient,
    bary_objective,
    bary_sgd_step,
    condition_diagnostics,
    default_sgd_schedule,
    grad_norm,
    mean_transport,
    noncentered_split,
    reattach_mean,
    run_bary_gd,
    run_bary_sgd,
    variance_of,
)
from .regularized import (
    RegConfig,
    default_step_size,
    infer_kappa_box,
    reg_gradient,
    reg_mean,
    reg_objective,
    rbary_gd_step,
    run_rbary_gd,
)
from .median import (
    MedianConfig,
    augment_noncentered,
    deaugment,
    median_gd_step,
    median_gradient,
    median_iteration_budget,
    median_objective,
    run_median_gd,
    w2_smoothed,
)
from .euclidean import (
    EuclideanConfig,
    egd_step_size,
    esgd_step_size,
    euclid_gradient,
    hessian_quadratic_form_bounds,
    run_egd,
    run_esgd,
)
from .datasets import (
    GenSpec,
    generate,
    generate_known_barycenter,
    haar_orthogonal,
    load_dataset,
    perturb_rank_one,
    save_dataset,
)
from .sdp import (
    coupling_cross_covariance,
    read_sdpa,
    sdp_export,
    sdp_objective_at,
    sdpa_inner_product,
)
from .reports import (
    TraceWriter,
    load_reference_point,
    read_trace_csv,
    summary_payload,
    validate_trace_csv,
    write_summary_json,
    write_trace_csv,
)
from .experiments import derive_seed, dim_sweep, passes_until, robustness

__version__ = "0.1.0"
