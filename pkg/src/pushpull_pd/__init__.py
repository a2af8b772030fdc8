"""Push-pull distributed primal-dual method for coupled-constraint convex
problems over time-varying directed networks."""

from .analysis import (
    BalanceVector,
    TraceRow,
    compute_row,
    estimate_abs_prob,
    fit_rate,
    propagate_balance,
    transformed_tracker,
)
from .engine import (
    StepSchedule,
    SwarmState,
    Trace,
    ergodic_average,
    init_state,
    run,
    step,
    step_size,
)
from .network import (
    DiGraph,
    GraphSchedule,
    WeightSchedule,
    canonical_schedule,
    check_connectivity,
    uniform_col_weights,
    uniform_row_weights,
    uniform_weights,
    validate_weights,
)
from .oracle import SaddleCertificate, min_over_X, solve_centralized, verify_saddle
from .problem import (
    BoxSet,
    ConvexRow,
    LocalConstraint,
    LocalObjective,
    ProblemInstance,
    canonical_instance,
    compute_dual_radius,
    eval_constraints,
    eval_objective,
    grad_objective,
    jac_constraints,
    primal_grad,
)
from .projections import DualSet, project_box, project_dual

__version__ = "0.1.0"

__all__ = [
    "BalanceVector",
    "TraceRow",
    "compute_row",
    "estimate_abs_prob",
    "fit_rate",
    "propagate_balance",
    "transformed_tracker",
    "StepSchedule",
    "SwarmState",
    "Trace",
    "ergodic_average",
    "init_state",
    "run",
    "step",
    "step_size",
    "DiGraph",
    "GraphSchedule",
    "WeightSchedule",
    "canonical_schedule",
    "check_connectivity",
    "uniform_col_weights",
    "uniform_row_weights",
    "uniform_weights",
    "validate_weights",
    "SaddleCertificate",
    "min_over_X",
    "solve_centralized",
    "verify_saddle",
    "BoxSet",
    "ConvexRow",
    "LocalConstraint",
    "LocalObjective",
    "ProblemInstance",
    "canonical_instance",
    "compute_dual_radius",
    "eval_constraints",
    "eval_objective",
    "grad_objective",
    "jac_constraints",
    "primal_grad",
    "DualSet",
    "project_box",
    "project_dual",
]
