"""Asynchronous dual coordinate descent for l2-regularized linear classifiers."""
from .data import Dataset, IndexPartition, ParseError, SparseExample, fold_labels, load_dataset, parse_libsvm, partition_indices
from .diagnostics import (
    BackwardErrorReport,
    TraceRecord,
    backward_error,
    bound_M,
    dual_objective,
    duality_gap,
    fixed_point_operator,
    kkt_residual,
    predict_accuracy,
    primal_objective,
    recompute_w,
)
from .loss import DualDomain, LossSpec, NumericError, conjugate_loss, primal_loss, prox_point, solve_subproblem
from .solver import VARIANTS, Model, SolverConfig, train

__version__ = "0.1.0"
