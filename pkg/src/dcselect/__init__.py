"""Bayesian variable selection via difference-of-convex optimization."""

from .baselines import BaselineConfig, ard_em_step, ard_em_surrogate, pgd_step, run_baseline
from .dc_solver import (
    SolveTrace,
    SolverConfig,
    boundary_accelerate,
    dc_step,
    residual_distance,
    solve,
)
from .errors import (
    DcselectError,
    LinearSolverError,
    NumericalError,
    ProjectionConvergenceError,
    ValidationError,
)
from .experiments import (
    ScenarioConfig,
    SelectionResult,
    SpatialDataset,
    gen_synthetic,
    make_radial_dataset,
    run_replications,
    select_variables,
    selection_metrics,
    spatial_fit,
)
from .model_core import (
    BoxBounds,
    ConstraintSpec,
    ProblemInstance,
    build_identity_instance,
    build_instance,
    standardize,
    standardize_columns,
    standardize_vector,
)
from .objective import (
    GradientDiag,
    ObjectiveValue,
    PosteriorSummary,
    coordinate_derivative,
    divergence_condition,
    grad,
    loss,
    posterior_summary,
    rss_identity_check,
)
from .projections import (
    RegionDecomposition,
    alternating_projection,
    decompose_regions,
    pava_weighted,
    project_box,
    project_group_mean,
    project_overlap_isotonic,
    project_score_monotone,
)

__version__ = "0.1.0"
