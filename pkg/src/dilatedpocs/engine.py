"""Alternating and simultaneous projection iterations.

Both engines run full cycles over the constraint sets and record, per
cycle, the iterate displacement and the worst dilated-set violation. The
outcome is classified as converged (residual below tolerance), a limit
cycle (the per-cycle state stopped moving while residuals remain), or an
exhausted iteration budget.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .linalg import as_vector


class Status(Enum):
    CONVERGED = "converged"
    LIMIT_CYCLE = "limit_cycle"
    ITERATION_BUDGET_EXHAUSTED = "iteration_budget_exhausted"


@dataclass
class PocsOptions:
    """Iteration controls shared by both engines.

    ``step_tol`` is a relative displacement threshold: a cycle is stagnant
    when the full-cycle displacement is at most ``step_tol * (1 + |x|)``.
    A limit cycle is declared after ``stagnation_window`` consecutive
    stagnant cycles with the residual still above ``residual_tol``; exact
    state revisiting is never required since floating point will not
    reproduce it. ``thin_every = 0`` picks a thinning stride automatically
    (every cycle up to dimension 1000, sparser checkpoints above).
    """

    max_iters: int = 10_000
    step_tol: float = 1e-8
    residual_tol: float = 1e-9
    record_trace: bool = True
    stagnation_window: int = 10
    thin_every: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.step_tol <= 0 or self.residual_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.stagnation_window < 1:
            raise ValueError("stagnation_window must be >= 1")
        if self.thin_every < 0:
            raise ValueError("thin_every must be >= 0")


@dataclass
class PocsTrace:
    """Per-cycle history: scalars for every cycle, iterates possibly thinned."""

    residuals: list = field(default_factory=list)
    displacements: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    iterate_cycles: list = field(default_factory=list)

    @property
    def cycles(self):
        return len(self.residuals)

    def record(self, cycle, x, residual, displacement, thin_every):
        self.residuals.append(residual)
        self.displacements.append(displacement)
        self.norms.append(float(np.linalg.norm(x)))
        if thin_every and cycle % thin_every == 0:
            self.iterates.append(x.copy())
            self.iterate_cycles.append(cycle)


@dataclass
class PocsOutcome:
    status: Status
    x_final: np.ndarray
    trace: PocsTrace


def _validate_sets(sets, x0):
    if not sets:
        raise ValueError("need at least one constraint set")
    x = as_vector(x0, "x0").copy()
    for s in sets:
        if s.dim != x.size:
            raise ValueError(f"dimension mismatch: set has dim {s.dim}, x0 has length {x.size}")
    return x


def _thin_stride(opts, dim):
    if not opts.record_trace:
        return 0
    if opts.thin_every:
        return opts.thin_every
    return 1 if dim <= 1000 else max(1, opts.max_iters // 200)


# residual improvement below this relative level over the window counts as
# numerically stationary; a cycle's residual approaches its limit
# geometrically and flatlines at machine precision, while even very slow
# convergence toward feasibility keeps improving well above this level
_PLATEAU_REL = 1e-9


def _stagnant(trace, opts):
    w = opts.stagnation_window
    if trace.cycles < w:
        return False
    scale = 1.0 + trace.norms[-1]
    if any(d > opts.step_tol * scale for d in trace.displacements[-w:]):
        return False
    # the per-cycle state stopped moving; call it a limit cycle only if the
    # residual has also flatlined, otherwise the run is still converging
    first, last = trace.residuals[-w], trace.residuals[-1]
    return first > 0.0 and (first - last) <= _PLATEAU_REL * first


def classify_outcome(trace, opts):
    """Status implied by a recorded trace (same rule the engines apply live)."""
    if trace.cycles == 0:
        raise ValueError("empty trace")
    if trace.residuals[-1] <= opts.residual_tol:
        return Status.CONVERGED
    if _stagnant(trace, opts):
        return Status.LIMIT_CYCLE
    return Status.ITERATION_BUDGET_EXHAUSTED


def alternating_pocs(sets, x0, epsilon=0.0, opts=None):
    """Cyclic projections onto each set dilated by ``rate_i * epsilon``.

    With a nonempty dilated intersection the iteration is Fejer monotone
    and converges into the intersection; otherwise it settles into a limit
    cycle, which is reported instead of a solution.
    """
    opts = opts or PocsOptions()
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    x = _validate_sets(sets, x0)
    thin = _thin_stride(opts, x.size)
    trace = PocsTrace()
    status = Status.ITERATION_BUDGET_EXHAUSTED
    for cycle in range(1, opts.max_iters + 1):
        x_prev = x
        for s in sets:
            x = s.project_dilated(x, epsilon)
        residual = max(s.violation_dilated(x, epsilon) for s in sets)
        displacement = float(np.linalg.norm(x - x_prev))
        trace.record(cycle, x, residual, displacement, thin)
        if residual <= opts.residual_tol:
            status = Status.CONVERGED
            break
        if _stagnant(trace, opts):
            status = Status.LIMIT_CYCLE
            break
    return PocsOutcome(status, x, trace)


def simultaneous_pocs(sets, weights, x0, opts=None, epsilon=0.0):
    """Weighted average of all projections from the same iterate.

    Converges (by vanishing displacement) to the minimizer of the weighted
    sum of squared distances to the sets, i.e. the MMSE compromise when
    the sets do not intersect. Weights must be nonnegative and sum to one;
    unnormalized weights are rejected rather than silently rescaled.
    """
    opts = opts or PocsOptions()
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    x = _validate_sets(sets, x0)
    w = as_vector(weights, "weights")
    if w.size != len(sets):
        raise ValueError(f"got {w.size} weights for {len(sets)} sets")
    if np.any(w < 0):
        raise ValueError("weights must be >= 0")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
    thin = _thin_stride(opts, x.size)
    trace = PocsTrace()
    status = Status.ITERATION_BUDGET_EXHAUSTED
    for cycle in range(1, opts.max_iters + 1):
        x_prev = x
        x = np.zeros_like(x_prev)
        for wi, s in zip(w, sets):
            if wi != 0.0:
                x += wi * s.project_dilated(x_prev, epsilon)
        residual = max(s.violation_dilated(x, epsilon) for s in sets)
        displacement = float(np.linalg.norm(x - x_prev))
        trace.record(cycle, x, residual, displacement, thin)
        if displacement <= opts.step_tol * (1.0 + float(np.linalg.norm(x))):
            status = Status.CONVERGED
            break
    return PocsOutcome(status, x, trace)
