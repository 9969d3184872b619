"""Projections onto convex sets with parametric dilation and erosion.

The package provides exact Euclidean projections onto a small library of
convex set families, alternating and simultaneous projection engines, an
interval-halving search for the least dilation that makes infeasible
constraint collections intersect (a minimax solution), and an algebraic
computed-tomography pipeline built on the same machinery.
"""

from .linalg import SparseMatrix, as_vector, axpy, dot, norm2, spmv, spmv_transpose
from .sets import (
    AffineSet,
    BallSet,
    BandlimitSet,
    BoxSet,
    ConvexSet,
    ErosionError,
    PointSet,
    SlabSet,
    set_from_dict,
    set_to_dict,
)
from .engine import (
    PocsOptions,
    PocsOutcome,
    PocsTrace,
    Status,
    alternating_pocs,
    classify_outcome,
    simultaneous_pocs,
)
from .search import (
    BracketingError,
    DilationProblem,
    DilationResult,
    ToleranceConflictError,
    UnsolvableProblemError,
    feasibility_probe,
    initial_bracket,
    interval_halving,
)
from .solvers import (
    LinearSystem,
    SingularSystemError,
    SolveReport,
    chebyshev_oracle,
    minimax_solve,
    mmse_solve,
    residual_report,
)

__version__ = "0.1.0"

__all__ = [
    "SparseMatrix",
    "as_vector",
    "dot",
    "norm2",
    "axpy",
    "spmv",
    "spmv_transpose",
    "ConvexSet",
    "AffineSet",
    "SlabSet",
    "BoxSet",
    "BallSet",
    "PointSet",
    "BandlimitSet",
    "ErosionError",
    "set_to_dict",
    "set_from_dict",
    "PocsOptions",
    "PocsTrace",
    "PocsOutcome",
    "Status",
    "alternating_pocs",
    "simultaneous_pocs",
    "classify_outcome",
    "DilationProblem",
    "DilationResult",
    "UnsolvableProblemError",
    "BracketingError",
    "ToleranceConflictError",
    "feasibility_probe",
    "initial_bracket",
    "interval_halving",
    "LinearSystem",
    "SolveReport",
    "SingularSystemError",
    "mmse_solve",
    "minimax_solve",
    "chebyshev_oracle",
    "residual_report",
]
