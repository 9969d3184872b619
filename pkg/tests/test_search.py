import numpy as np
import pytest

from dilatedpocs import (
    AffineSet,
    BallSet,
    DilationProblem,
    PocsOptions,
    SparseMatrix,
    LinearSystem,
    UnsolvableProblemError,
    chebyshev_oracle,
    feasibility_probe,
    initial_bracket,
    interval_halving,
)
from dilatedpocs.solvers import row_sets

from conftest import REF_A, REF_Y


def reference_sets(rates=None):
    rates = rates if rates is not None else np.ones(5)
    return [AffineSet(r, y, rate=c) for r, y, c in zip(REF_A, REF_Y, rates)]


def test_probe_reference_feasible_at_three():
    p = feasibility_probe(reference_sets(), 3.0, np.zeros(2))
    assert p.feasible
    assert all(s.violation(p.x) <= 3.0 + 1e-8 for s in reference_sets())


def test_probe_reference_infeasible_at_one():
    # the grid oracle puts the minimax value at 3.0 > 1.0
    system = LinearSystem(SparseMatrix.from_dense(REF_A), REF_Y)
    _, eps_star = chebyshev_oracle(system)
    assert eps_star > 1.0
    p = feasibility_probe(reference_sets(), 1.0, np.zeros(2))
    assert not p.feasible


def test_probe_feasible_with_common_point(rng):
    z = rng.normal(size=2)
    sets = [BallSet(z, 1.0), BallSet(z + [0.5, 0.0], 1.0)]
    p = feasibility_probe(sets, 0.0, rng.normal(size=2))
    assert p.feasible


def test_initial_bracket_short_circuits_when_feasible(rng):
    z = rng.normal(size=2)
    sets = [BallSet(z, 1.0), BallSet(z, 2.0)]
    lo, hi, probe, _ = initial_bracket(sets, rng.normal(size=2))
    assert (lo, hi) == (0.0, 0.0)
    assert probe.feasible


def test_initial_bracket_reference():
    lo, hi, probe, _ = initial_bracket(reference_sets(), np.zeros(2))
    assert lo == 0.0
    assert hi >= 3.0
    assert probe.feasible


def test_initial_bracket_single_plane():
    lo, hi, _, _ = initial_bracket([AffineSet([1.0, 2.0], 3.0)], np.zeros(2))
    assert (lo, hi) == (0.0, 0.0)


def test_all_zero_rates_unsolvable():
    sets = [AffineSet([1.0], 0.0, rate=0.0), AffineSet([1.0], 1.0, rate=0.0)]
    with pytest.raises(UnsolvableProblemError):
        initial_bracket(sets, np.zeros(1))


def test_interval_halving_reference():
    problem = DilationProblem(reference_sets(), np.array([10.0 / 7.0, 10.0 / 7.0]))
    result = interval_halving(problem, bracket_tol=1e-4)
    assert abs(result.epsilon_star - 3.0) <= 1e-4 + 1e-9
    assert np.allclose(result.x_star, [2.0, 2.0], atol=1e-2)
    lo, hi = result.bracket_history[-1]
    assert hi - lo <= 1e-4 + 1e-12
    assert result.probes >= len(result.bracket_history) - 1


def test_interval_halving_parallel_planes():
    d = 1.7
    sets = [AffineSet([1.0, 0.0], 0.0), AffineSet([1.0, 0.0], d)]
    result = interval_halving(DilationProblem(sets, np.zeros(2)), bracket_tol=1e-6)
    assert abs(result.epsilon_star - d / 2.0) <= 1e-6 + 1e-9
    # the optimal intersection is the whole midline, not a point
    assert abs(result.x_star[0] - d / 2.0) <= 1e-5


def test_interval_halving_matches_oracle_on_random_systems(rng):
    for _ in range(10):
        A = rng.uniform(-3, 3, (5, 2))
        y = rng.uniform(-3, 3, 5)
        system = LinearSystem(SparseMatrix.from_dense(A), y)
        problem = DilationProblem(row_sets(system), np.zeros(2),
                                  PocsOptions(max_iters=50_000))
        result = interval_halving(problem, bracket_tol=5e-4)
        _, eps_oracle = chebyshev_oracle(system)
        assert abs(result.epsilon_star - eps_oracle) <= 2 * 5e-4


def test_bracket_invariant_all_steps():
    problem = DilationProblem(reference_sets(), np.zeros(2))
    result = interval_halving(problem, bracket_tol=1e-3)
    los, his = zip(*result.bracket_history)
    assert all(a <= b for a, b in result.bracket_history)
    assert all(l2 >= l1 for l1, l2 in zip(los, los[1:]))
    assert all(h2 <= h1 for h1, h2 in zip(his, his[1:]))


def test_feasibility_monotone_in_eps():
    sets = reference_sets()
    labels = [feasibility_probe(sets, eps, np.zeros(2)).feasible
              for eps in (0.0, 1.0, 2.0, 2.9, 3.1, 4.0, 8.0)]
    # once feasible, stays feasible
    first_true = labels.index(True)
    assert all(labels[first_true:])
    assert not any(labels[:first_true])


def test_rate_scaling_divides_epsilon():
    base = interval_halving(DilationProblem(reference_sets(), np.zeros(2)),
                            bracket_tol=1e-5)
    scaled_sets = reference_sets(rates=np.full(5, 2.0))
    scaled = interval_halving(DilationProblem(scaled_sets, np.zeros(2)),
                              bracket_tol=5e-6)
    assert abs(scaled.epsilon_star - base.epsilon_star / 2.0) <= 1e-4
    # witnesses satisfy both problems' memberships
    for s_b, s_s in zip(reference_sets(), scaled_sets):
        assert s_b.contains(base.x_star, base.epsilon_star, tol=1e-6)
        assert s_s.contains(scaled.x_star, scaled.epsilon_star, tol=1e-6)


def test_hard_constraints_respected():
    # the two axis rows become hard; only the parallel planes may dilate
    rates = np.array([0.0, 0.0, 1.0, 1.0, 1.0])
    result = interval_halving(DilationProblem(reference_sets(rates), np.zeros(2)),
                              bracket_tol=1e-5)
    x = result.x_star
    assert abs(x[0]) <= 1e-5 and abs(x[1]) <= 1e-5
    # with x pinned to the origin the worst parallel plane needs eps = 7
    assert abs(result.epsilon_star - 7.0) <= 1e-3


def test_warm_started_probes_preserve_witness_validity(rng):
    A = rng.uniform(-2, 2, (6, 2))
    y = rng.uniform(-2, 2, 6)
    system = LinearSystem(SparseMatrix.from_dense(A), y)
    result = interval_halving(DilationProblem(row_sets(system), np.zeros(2)),
                              bracket_tol=1e-4)
    for s in row_sets(system):
        assert s.contains(result.x_star, result.epsilon_star, tol=1e-4)
