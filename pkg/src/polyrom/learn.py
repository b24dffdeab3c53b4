"""Representation learners for polynomial manifolds.

Two fitting strategies share the same subproblems. The POD-based learner
takes the leading left singular vectors as the basis, projects the data
linearly, and solves one ridge problem for the coefficient matrix. The
alternating learner then cycles three exact-or-monotone block updates:
an orthogonal Procrustes solve for the stacked basis, the ridge solve for
the coefficients, and a per-column nonlinear re-encoding of the snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .features import g_eval
from .manifold import (EncodeSettings, PolynomialManifold, encode_nls,
                       energy_metric, _representation)
from .snapshot import CenteredSnapshots


@dataclass
class LearnConfig:
    """Dimensions and knobs shared by both learners."""

    r: int
    q: int
    p: int
    gamma: float = 0.0
    am_energy_tolerance: float = 1e-3
    am_max_outer_iterations: int = 100
    encode: EncodeSettings = field(default_factory=EncodeSettings)

    def __post_init__(self):
        if self.r < 1 or self.q < 0:
            raise ValueError("need r >= 1 and q >= 0")
        if self.p < 2:
            raise ValueError("polynomial order p must be >= 2")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")


@dataclass
class LearnReport:
    """Per-outer-iteration history of the alternating learner."""

    objective_history: list
    energy_history: list
    iterations: int
    converged: bool


def procrustes(centered: np.ndarray, C: np.ndarray):
    """Best orthonormal-column map of coefficients C onto the data.

    Returns (Omega, degenerate) where Omega = U W^T from the thin SVD of
    centered @ C^T minimizes ||centered - Omega C||_F over matrices with
    orthonormal columns. When centered @ C^T is rank deficient the
    minimizer is not unique; the SVD-canonical one is returned and the
    degeneracy flag is set.
    """
    M = np.asarray(centered, dtype=float) @ np.asarray(C, dtype=float).T
    U, s, Wt = np.linalg.svd(M, full_matrices=False)
    tol = s[0] * max(M.shape) * np.finfo(float).eps if s.size else 0.0
    degenerate = bool(s.size == 0 or s[0] == 0.0 or s[-1] <= tol)
    return U @ Wt, degenerate


def solve_xi(V: np.ndarray, V_bar: np.ndarray, S_hat: np.ndarray,
             centered: np.ndarray, gamma: float, p: int) -> np.ndarray:
    """Ridge solve for the coefficient matrix given a fixed basis and coords.

    With D = V_bar^T centered and G the columnwise power features of S_hat,
    minimizes 0.5 ||D - Xi G||_F^2 + 0.5 gamma ||Xi||_F^2 through a stacked
    least-squares factorization (no explicit inverse). For an orthonormal
    stacked basis this is exactly the coefficient subproblem of the full
    representation objective.
    """
    q = V_bar.shape[1]
    r = S_hat.shape[0]
    m = (p - 1) * r
    if q == 0:
        return np.zeros((0, m))
    G = g_eval(S_hat, p)
    D = V_bar.T @ centered
    A = G.T
    B = D.T
    if gamma > 0:
        A = np.vstack([A, np.sqrt(gamma) * np.eye(m)])
        B = np.vstack([B, np.zeros((m, q))])
    XiT, *_ = np.linalg.lstsq(A, B, rcond=None)
    return XiT.T


def learn_pod(cs: CenteredSnapshots, cfg: LearnConfig):
    """Fit a manifold on the POD basis of the centered snapshots.

    V gets the leading r left singular vectors, V_bar the next q, the
    coordinates are the linear projection, and Xi solves the ridge
    subproblem. Returns (manifold, S_hat).
    """
    centered = cs.centered
    n, k = centered.shape
    if cfg.r + cfg.q > min(n, k):
        raise ValueError("r + q exceeds min(n, k)")
    U, s, _ = np.linalg.svd(centered, full_matrices=False)
    tol = (s[0] * max(n, k) * np.finfo(float).eps) if s.size else 0.0
    if np.count_nonzero(s > tol) < cfg.r + cfg.q:
        raise ValueError("insufficient data rank")
    V = U[:, :cfg.r]
    V_bar = U[:, cfg.r:cfg.r + cfg.q]
    S_hat = V.T @ centered
    Xi = solve_xi(V, V_bar, S_hat, centered, cfg.gamma, cfg.p)
    m = PolynomialManifold(s_ref=cs.s_ref, V=V, V_bar=V_bar, Xi=Xi, p=cfg.p)
    return m, S_hat


def _objective(m: PolynomialManifold, S_hat: np.ndarray, centered: np.ndarray,
               gamma: float) -> float:
    res = centered - _representation(m, S_hat)
    return 0.5 * float(np.linalg.norm(res) ** 2) + 0.5 * gamma * float(np.linalg.norm(m.Xi) ** 2)


def learn_am(cs: CenteredSnapshots, cfg: LearnConfig, init=None):
    """Alternating-minimization fit, warm-started from the POD learner.

    Each outer iteration updates the stacked basis (Procrustes), the
    coefficient matrix (ridge), then every snapshot coordinate (damped
    Gauss-Newton warm-started at its previous value). Stops when the
    captured-energy fraction changes by less than am_energy_tolerance, or
    at the iteration cap. Returns (manifold, S_hat, report).
    """
    centered = cs.centered
    if init is None:
        m, S_hat = learn_pod(cs, cfg)
    else:
        m, S_hat = init
        S_hat = np.asarray(S_hat, dtype=float).copy()
    obj_hist = [_objective(m, S_hat, centered, cfg.gamma)]
    en_hist = [energy_metric(m, S_hat, centered + cs.s_ref[:, None], cs.s_ref)]
    iterations = 0
    converged = False
    snapshots = centered + cs.s_ref[:, None]
    for iterations in range(1, cfg.am_max_outer_iterations + 1):
        if m.q:
            C = np.vstack([S_hat, m.Xi @ g_eval(S_hat, cfg.p)])
        else:
            C = S_hat
        Omega, _ = procrustes(centered, C)
        V, V_bar = Omega[:, :cfg.r], Omega[:, cfg.r:]
        Xi = solve_xi(V, V_bar, S_hat, centered, cfg.gamma, cfg.p)
        m = PolynomialManifold(s_ref=cs.s_ref, V=V, V_bar=V_bar, Xi=Xi, p=cfg.p)
        for j in range(S_hat.shape[1]):
            settings = replace(cfg.encode, initial_guess=S_hat[:, j])
            S_hat[:, j] = encode_nls(m, snapshots[:, j], settings).s_hat
        new_obj = _objective(m, S_hat, centered, cfg.gamma)
        if not np.isfinite(new_obj):
            raise RuntimeError("AM diverged")
        obj_hist.append(new_obj)
        en_hist.append(energy_metric(m, S_hat, snapshots, cs.s_ref))
        if abs(en_hist[-1] - en_hist[-2]) < cfg.am_energy_tolerance:
            converged = True
            break
    report = LearnReport(
        objective_history=obj_hist,
        energy_history=en_hist,
        iterations=iterations,
        converged=converged,
    )
    return m, S_hat, report
