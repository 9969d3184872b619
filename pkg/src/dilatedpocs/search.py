"""Search for the least global dilation that makes constraint sets intersect.

Feasibility at a given dilation is probed by running alternating
projections; convergence certifies feasibility with a witness point, a
limit cycle certifies infeasibility. The minimal feasible dilation is then
bracketed and located by interval halving. Feasibility is monotone in the
dilation parameter, so the bracket invariant (infeasible low end, feasible
high end with witness) is maintained at every step.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .engine import PocsOptions, Status, alternating_pocs, simultaneous_pocs


class UnsolvableProblemError(RuntimeError):
    """No dilation can help: every rate is zero and the sets do not intersect."""


class BracketingError(RuntimeError):
    """Doubling the trial dilation never reached a feasible value."""


class ToleranceConflictError(RuntimeError):
    """Probe results contradict each other beyond the stated tolerances."""


@dataclass
class ProbeResult:
    feasible: bool
    x: np.ndarray
    outcome: object = None


@dataclass
class DilationProblem:
    sets: list
    x0: np.ndarray
    options: PocsOptions = field(default_factory=PocsOptions)


@dataclass
class DilationResult:
    epsilon_star: float
    x_star: np.ndarray
    bracket_history: list
    probes: int

    def to_dict(self):
        return {
            "epsilon_star": self.epsilon_star,
            "x_star": self.x_star.tolist(),
            "probes": self.probes,
            "bracket_history": [[lo, hi] for lo, hi in self.bracket_history],
        }


def feasibility_probe(sets, epsilon, x0, opts=None):
    """Classify a trial dilation as feasible (with witness) or infeasible.

    Budget exhaustion gets one warm-started retry; if the retry still
    exhausts the budget, the final iterate's dilated memberships decide.
    """
    opts = opts or PocsOptions()
    out = alternating_pocs(sets, x0, epsilon, opts)
    if out.status is Status.ITERATION_BUDGET_EXHAUSTED:
        out = alternating_pocs(sets, out.x_final, epsilon, opts)
    if out.status is Status.CONVERGED:
        return ProbeResult(True, out.x_final, out)
    if out.status is Status.LIMIT_CYCLE:
        return ProbeResult(False, out.x_final, out)
    x = out.x_final
    feasible = all(s.violation_dilated(x, epsilon) <= opts.residual_tol for s in sets)
    return ProbeResult(feasible, x, out)


def initial_bracket(sets, x0, opts=None, max_doublings=60):
    """Bracket the minimal feasible dilation.

    Returns ``(lo, hi, hi_probe, probes)`` with ``probe(hi)`` feasible and
    ``lo = 0`` (either the exact answer when ``hi == 0`` or a trivially
    valid lower end). The first trial for ``hi`` is the worst rate-scaled
    residual of the equal-weight simultaneous-projection compromise point,
    doubled until feasible.
    """
    opts = opts or PocsOptions()
    p0 = feasibility_probe(sets, 0.0, x0, opts)
    probes = 1
    if p0.feasible:
        return 0.0, 0.0, p0, probes
    rates = [s.rate for s in sets]
    if all(r == 0.0 for r in rates):
        raise UnsolvableProblemError(
            "the undilated sets do not intersect and every dilation rate is zero")
    weights = np.full(len(sets), 1.0 / len(sets))
    mmse = simultaneous_pocs(sets, weights, x0, opts)
    xm = mmse.x_final
    eps = max(s.violation(xm) / s.rate for s in sets if s.rate > 0)
    if eps <= 0.0:
        # compromise point already satisfies every dilatable set; only hard
        # constraints are violated, so start the doubling from unit scale
        eps = 1.0
    start = p0.x
    for _ in range(max_doublings):
        p = feasibility_probe(sets, eps, start, opts)
        probes += 1
        if p.feasible:
            return 0.0, eps, p, probes
        start = p.x
        eps *= 2.0
    raise BracketingError(f"no feasible dilation found up to eps={eps}")


def bisect_feasible(probe, lo, hi, hi_witness, bracket_tol):
    """Interval halving on a monotone feasibility predicate.

    ``probe(eps, x_start)`` must return an object with ``feasible`` and
    ``x`` attributes. ``lo`` must be infeasible (or exactly 0) and ``hi``
    feasible with the supplied witness. Returns the feasible end once the
    bracket is narrower than ``bracket_tol``, along with its witness, the
    bracket history, and the number of probes spent.
    """
    if bracket_tol <= 0:
        raise ValueError("bracket_tol must be > 0")
    if hi < lo:
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    history = [(lo, hi)]
    witness = hi_witness
    probes = 0
    while hi - lo > bracket_tol:
        mid = 0.5 * (lo + hi)
        r = probe(mid, witness)
        probes += 1
        if r.feasible:
            hi, witness = mid, r.x
        else:
            lo = mid
        history.append((lo, hi))
    return hi, witness, history, probes


def interval_halving(problem, bracket_tol=None):
    """Locate the minimal feasible dilation for a :class:`DilationProblem`.

    ``bracket_tol`` defaults to 1e-4 times the initial feasible trial. The
    reported dilation is the feasible end of the final bracket, so the
    returned witness always satisfies every rate-scaled membership.

    Probes certify feasibility once the worst dilated violation falls to
    a tenth of the bracket tolerance (rate-scaled), never looser than the
    options' residual tolerance demands; that keeps certificates exactly as
    sharp as the bracket needs while sparing slowly-creeping projections
    from chasing an irrelevantly small residual.
    """
    opts = problem.options or PocsOptions()
    sets = problem.sets
    lo, hi, p_hi, probes = initial_bracket(sets, problem.x0, opts)
    if hi == 0.0:
        return DilationResult(0.0, p_hi.x, [(0.0, 0.0)], probes)
    if bracket_tol is None:
        bracket_tol = 1e-4 * hi
    min_rate = min(s.rate for s in sets if s.rate > 0)
    probe_opts = replace(opts, residual_tol=max(opts.residual_tol,
                                                0.1 * bracket_tol * min_rate))

    def probe(eps, x_start):
        return feasibility_probe(sets, eps, x_start, probe_opts)

    eps_star, x_star, history, halving_probes = bisect_feasible(
        probe, lo, hi, p_hi.x, bracket_tol)
    bad = max(s.violation_dilated(x_star, eps_star) for s in sets)
    if bad > 10 * probe_opts.residual_tol:
        raise ToleranceConflictError(
            f"witness violates a set by {bad} at eps={eps_star}; "
            "probe classifications were inconsistent with the tolerances")
    return DilationResult(eps_star, x_star, history, probes + halving_probes)
