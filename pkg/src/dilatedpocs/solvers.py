"""Least-squares and minimax solvers for overdetermined linear systems.

The least-squares path solves the normal equations (directly for small
column counts, by conjugate gradient without forming the Gram matrix for
large ones). The minimax path treats each row as an affine constraint set
and finds the smallest rate-scaled dilation at which the slabs intersect.
A coarse-to-fine grid oracle provides an independent check at desk scale.
"""

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .engine import PocsOptions
from .linalg import SparseMatrix, as_vector
from .search import DilationProblem, interval_halving
from .sets import AffineSet


class SingularSystemError(RuntimeError):
    """The normal equations are singular or numerically unusable."""


ResidualReport = namedtuple("ResidualReport", ["l2", "linf", "per_row"])


@dataclass
class LinearSystem:
    """Overdetermined system ``y = A x`` with L rows >= K columns."""

    A: SparseMatrix
    y: np.ndarray

    def __post_init__(self):
        self.y = as_vector(self.y, "y")
        L, K = self.A.shape
        if L < K or K < 1:
            raise ValueError(f"need rows >= cols >= 1, got shape {self.A.shape}")
        if self.y.size != L:
            raise ValueError(f"y has length {self.y.size}, expected {L}")
        if np.any(np.diff(self.A.row_ptr) == 0):
            raise ValueError("matrix has an all-zero row; the system is ill-posed")

    @property
    def rows(self):
        return self.A.rows

    @property
    def cols(self):
        return self.A.cols


@dataclass
class SolveReport:
    """Solution plus residuals recomputed from x at report time."""

    x: np.ndarray
    residual_l2: float
    residual_linf: float
    method: str
    iterations: int = 0
    epsilon_star: float = None
    probes: int = None

    def to_dict(self):
        d = {
            "x": self.x.tolist(),
            "residual_l2": self.residual_l2,
            "residual_linf": self.residual_linf,
            "method": self.method,
            "iterations": self.iterations,
        }
        if self.epsilon_star is not None:
            d["epsilon_star"] = self.epsilon_star
        if self.probes is not None:
            d["probes"] = self.probes
        return d


def residual_report(system, x):
    """Exact residual metrics of ``x``: (l2, linf, per-row signed residuals)."""
    x = as_vector(x, "x")
    r = system.y - system.A.matvec(x)
    return ResidualReport(float(np.linalg.norm(r)), float(np.max(np.abs(r))), r)


def _report(system, x, method, iterations=0, epsilon_star=None, probes=None):
    rr = residual_report(system, x)
    return SolveReport(x, rr.l2, rr.linf, method, iterations,
                       epsilon_star=epsilon_star, probes=probes)


def mmse_solve(system, dense_max_cols=64, cond_limit=1e12):
    """Least-squares solution of the normal equations ``A^T A x = A^T y``."""
    A, y = system.A, system.y
    K = A.cols
    b = A.rmatvec(y)
    if K <= dense_max_cols:
        gram = (A.scipy.T @ A.scipy).toarray()
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > cond_limit:
            raise SingularSystemError(
                f"normal equations are singular or ill-conditioned (cond ~ {cond:.3g})")
        x = np.linalg.solve(gram, b)
        return _report(system, x, "mmse", iterations=1)

    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    op = spla.LinearOperator((K, K), matvec=lambda z: A.rmatvec(A.matvec(z)),
                             dtype=np.float64)
    x, info = spla.cg(op, b, rtol=1e-12, atol=0.0, maxiter=20 * K, callback=count)
    if info != 0:
        raise SingularSystemError(f"conjugate gradient failed to converge (info={info})")
    return _report(system, x, "mmse", iterations=iters)


def row_sets(system, rates=None):
    """The system's rows as affine constraint sets with the given rates."""
    L = system.rows
    if rates is None:
        rates = np.ones(L)
    rates = as_vector(rates, "rates")
    if rates.size != L:
        raise ValueError(f"got {rates.size} rates for {L} rows")
    if np.any(rates < 0):
        raise ValueError("rates must be >= 0")
    return [AffineSet(system.A.row_dense(i), system.y[i], rate=rates[i])
            for i in range(L)]


def minimax_solve(system, rates=None, bracket_tol=None, opts=None, normalize_rows=False):
    """Minimize the largest rate-weighted row residual via dilation search.

    With unit rates this minimizes ``max_l |y_l - r_l . x|`` in residual
    units; ``normalize_rows=True`` sets each rate to the row norm, which
    turns the objective into Euclidean distance to the row hyperplanes.
    The default probe options certify feasibility at residual 1e-6, far
    below any reasonable bracket tolerance, with a generous cycle budget
    for nearly-parallel rows that make the alternating steps creep.
    """
    if normalize_rows:
        if rates is not None:
            raise ValueError("pass either explicit rates or normalize_rows, not both")
        rates = np.sqrt(system.A.row_norms_sq())
    sets = row_sets(system, rates)
    try:
        x0 = mmse_solve(system).x
    except SingularSystemError:
        x0 = np.zeros(system.cols)
    opts = opts or PocsOptions(max_iters=50_000, residual_tol=1e-9)
    result = interval_halving(DilationProblem(sets, x0, opts), bracket_tol)
    return _report(system, result.x_star, "minimax",
                   iterations=len(result.bracket_history),
                   epsilon_star=result.epsilon_star, probes=result.probes)


def chebyshev_oracle(system, cell_target=1e-6, grid=61):
    """Independent minimax oracle: coarse-to-fine grid search, desk scale only.

    Searches a box around the least-squares solution sized by ten times its
    worst residual, halving the box around the best point seen so far until
    the cell size drops below ``cell_target``. The gentle shrink keeps flat
    valleys of the piecewise-linear objective inside the box. Returns
    ``(x, eps)``.
    """
    L, K = system.A.shape
    if K > 3:
        raise ValueError("grid oracle is limited to K <= 3 columns")
    dense = system.A.to_dense()
    x0, *_ = np.linalg.lstsq(dense, system.y, rcond=None)
    linf0 = float(np.max(np.abs(system.y - dense @ x0)))
    if linf0 == 0.0:
        return x0, 0.0

    def worst(points):
        res = points @ dense.T - system.y
        return np.max(np.abs(res), axis=1)

    # slope bound of the objective: the sample nearest the true minimizer
    # scores within lip * cell of it, so boxing the near-optimal samples
    # keeps the minimizer inside the refined box
    lip = float(np.sqrt(np.max(np.sum(dense * dense, axis=1)))) * math.sqrt(K)
    lo = x0 - 10.0 * linf0
    hi = x0 + 10.0 * linf0
    best_x, best_f = x0.copy(), linf0
    while True:
        axes = [np.linspace(a, b, grid) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        f = worst(pts)
        i = int(np.argmin(f))
        if f[i] < best_f:
            best_f, best_x = float(f[i]), pts[i].copy()
        cell = float(np.max(hi - lo)) / (grid - 1)
        if cell < cell_target:
            return best_x, best_f
        near = pts[f <= f[i] + lip * cell]
        lo_new = near.min(axis=0) - 1.5 * cell
        hi_new = near.max(axis=0) + 1.5 * cell
        # flat valleys of the piecewise-linear objective stall the shrink;
        # cut only the stalled dimensions, keeping the best point, where the
        # value spread inside the near-optimal set is at most lip * cell
        limit = 0.9 * (hi - lo)
        wide = hi_new - lo_new > limit
        lo_new[wide] = np.maximum(lo_new, best_x - 0.5 * limit)[wide]
        hi_new[wide] = np.minimum(hi_new, lo_new + limit)[wide]
        lo, hi = lo_new, hi_new
