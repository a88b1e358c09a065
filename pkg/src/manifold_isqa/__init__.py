"""Inexact successive quadratic approximation for l1-regularized problems,
with active-manifold identification and a manifold Newton second stage."""

import os as _os

# caps BLAS threads; only effective when numpy has not been imported yet
_threads = _os.environ.get("MANIFOLD_ISQA_THREADS")
if _threads and _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .problem import (
    CompositeProblem,
    LogisticLoss,
    LogisticProblem,
    QuadraticFunction,
    SparseDesignMatrix,
    example1,
    load_libsvm,
    parse_libsvm,
)
from .regularizer import L1Regularizer, SupportPattern, manifold_of
from .model import QuadraticModel, StopCriterion, check_stop
from .subsolvers import SubsolverBudget, solve
from .outer import OuterConfig, SolveReport, run

__version__ = "0.1.0"

__all__ = [
    "CompositeProblem",
    "L1Regularizer",
    "LogisticLoss",
    "LogisticProblem",
    "OuterConfig",
    "QuadraticFunction",
    "QuadraticModel",
    "SolveReport",
    "SparseDesignMatrix",
    "StopCriterion",
    "SubsolverBudget",
    "SupportPattern",
    "check_stop",
    "example1",
    "load_libsvm",
    "manifold_of",
    "parse_libsvm",
    "run",
    "solve",
]
