"""Operator inference: derivative estimation, regression assembly, solve.

The reduced operators are regressed from snapshot coordinates and their
estimated time derivatives. Derivatives are taken in reduced coordinates
with fourth-order finite-difference stencils that reset at trajectory
boundaries. The regression is blockwise Tikhonov-regularized and solved
through a stacked least-squares factorization; one shared factorization
serves all r target components since they decouple.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import MonomialTable, QuadIndexing, ghat_eval, quad_eval


def _trajectory_slices(k: int, trajectory_breaks) -> list:
    edges = (0,) + tuple(trajectory_breaks) + (k,)
    return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]


def time_derivatives(S_hat, times, trajectory_breaks=()) -> np.ndarray:
    """Fourth-order finite-difference time derivatives of reduced states.

    Interior columns use the centered five-point stencil; the first and
    last two columns of each trajectory use the one-sided five-point
    stencils. Stencils never cross a trajectory boundary. Each trajectory
    needs at least five snapshots at uniform spacing (checked to 1e-10
    relative).
    """
    S_hat = np.atleast_2d(np.asarray(S_hat, dtype=float))
    times = np.asarray(times, dtype=float)
    k = S_hat.shape[1]
    derivs = np.empty_like(S_hat)
    for start, stop in _trajectory_slices(k, trajectory_breaks):
        m = stop - start
        if m < 5:
            raise ValueError("trajectory shorter than 5 snapshots")
        t = times[start:stop]
        dt = (t[-1] - t[0]) / (m - 1)
        if np.max(np.abs(np.diff(t) - dt)) > 1e-10 * abs(dt):
            raise ValueError("nonuniform time spacing within a trajectory")
        f = S_hat[:, start:stop]
        d = np.empty_like(f)
        d[:, 2:m - 2] = (f[:, 0:m - 4] - 8 * f[:, 1:m - 3]
                         + 8 * f[:, 3:m - 1] - f[:, 4:m]) / (12 * dt)
        for i in (0, 1):
            d[:, i] = (-25 * f[:, i] + 48 * f[:, i + 1] - 36 * f[:, i + 2]
                       + 16 * f[:, i + 3] - 3 * f[:, i + 4]) / (12 * dt)
        for i in (m - 2, m - 1):
            d[:, i] = (25 * f[:, i] - 48 * f[:, i - 1] + 36 * f[:, i - 2]
                       - 16 * f[:, i - 3] + 3 * f[:, i - 4]) / (12 * dt)
        derivs[:, start:stop] = d
    return derivs


@dataclass
class RegressionProblem:
    """Feature matrix, derivative targets, block layout, and penalties.

    D has one row per snapshot with column blocks
    [1 | state | unique quadratic | higher-order monomials]; the quadratic
    and higher-order blocks may be absent (zero width). The penalty
    lambdas = (l1, l2, l3) cover the constant-plus-linear, quadratic, and
    higher-order blocks respectively.
    """

    D: np.ndarray
    R: np.ndarray
    r: int
    block_extents: dict
    lambdas: tuple
    table: MonomialTable | None = None
    quad_idx: QuadIndexing | None = None

    @property
    def n_columns(self) -> int:
        return self.D.shape[1]


@dataclass
class InferredOperators:
    """Reduced operators grouped by polynomial degree."""

    c_hat: np.ndarray
    A_hat: np.ndarray
    H_hat: np.ndarray
    P_hat: np.ndarray | None
    table: MonomialTable | None

    @property
    def r(self) -> int:
        return self.c_hat.size


def assemble(S_hat, derivs, table: MonomialTable | None,
             quad_idx: QuadIndexing | None, lambdas) -> RegressionProblem:
    """Build the regression data matrix and targets from reduced snapshots.

    Row j of D is [1, state_j, quad(state_j), ghat(state_j)]; row j of R is
    the derivative of column j. Pass ``table=None`` to omit the
    higher-order block (the linear-subspace variant) and ``quad_idx=None``
    to omit the quadratic block as well.
    """
    S_hat = np.atleast_2d(np.asarray(S_hat, dtype=float))
    derivs = np.atleast_2d(np.asarray(derivs, dtype=float))
    r, k = S_hat.shape
    if derivs.shape != (r, k):
        raise ValueError("derivative matrix shape must match the coordinates")
    cols = [np.ones((k, 1)), S_hat.T]
    extents = {"const_linear": (0, 1 + r)}
    pos = 1 + r
    if quad_idx is not None:
        if quad_idx.r != r:
            raise ValueError("quadratic index dimension mismatch")
        cols.append(quad_eval(S_hat, quad_idx).T)
        extents["quadratic"] = (pos, pos + quad_idx.size)
        pos += quad_idx.size
    else:
        extents["quadratic"] = (pos, pos)
    if table is not None:
        if table.r != r:
            raise ValueError("monomial table dimension mismatch")
        cols.append(ghat_eval(S_hat, table).T)
        extents["ghat"] = (pos, pos + len(table))
        pos += len(table)
    else:
        extents["ghat"] = (pos, pos)
    D = np.hstack(cols)
    bad = np.flatnonzero(~np.all(np.isfinite(D), axis=0))
    if bad.size:
        raise ValueError(f"non-finite feature in column {int(bad[0])}")
    lambdas = tuple(float(v) for v in lambdas)
    if len(lambdas) != 3 or any(v < 0 for v in lambdas):
        raise ValueError("lambdas must be three nonnegative values")
    return RegressionProblem(D=D, R=derivs.T, r=r, block_extents=extents,
                             lambdas=lambdas, table=table, quad_idx=quad_idx)


def solve(prob: RegressionProblem) -> InferredOperators:
    """Solve the blockwise-regularized regression for all operators.

    Each of the r target components independently minimizes
    ||D x - R_col||^2 + x^T diag(penalty) x, with the penalty built from
    the block lambdas; the problems share D so a single stacked
    factorization solves them all. With every lambda zero the data matrix
    must have full column rank.
    """
    l1, l2, l3 = prob.lambdas
    ncols = prob.n_columns
    penalty = np.zeros(ncols)
    a, b = prob.block_extents["const_linear"]
    penalty[a:b] = l1
    a, b = prob.block_extents["quadratic"]
    penalty[a:b] = l2
    a, b = prob.block_extents["ghat"]
    penalty[a:b] = l3
    if not penalty.any():
        if np.linalg.matrix_rank(prob.D) < ncols:
            raise RuntimeError("ill-posed regression; increase regularization")
        A, B = prob.D, prob.R
    else:
        A = np.vstack([prob.D, np.diag(np.sqrt(penalty))])
        B = np.vstack([prob.R, np.zeros((ncols, prob.r))])
    X, *_ = np.linalg.lstsq(A, B, rcond=None)
    a, b = prob.block_extents["const_linear"]
    c_hat = X[0]
    A_hat = X[1:b].T
    a, b = prob.block_extents["quadratic"]
    H_hat = X[a:b].T
    a, b = prob.block_extents["ghat"]
    P_hat = X[a:b].T if b > a else None
    return InferredOperators(c_hat=c_hat, A_hat=A_hat, H_hat=H_hat,
                             P_hat=P_hat, table=prob.table)
