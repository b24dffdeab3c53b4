"""Hyperparameter calibration by grid search.

The manifold regularization and the three regression penalties are
searched jointly; the score of a combination is the relative state error
of the trained ROM re-integrated over the training trajectories from
their encoded initial conditions. Manifold fits are cached per gamma
because they dominate the cost. Unstable integrations score infinity and
are flagged; ties break toward larger regularization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .learn import LearnConfig
from .pipeline import (default_ic_method, fit_manifold, predict_snapshots,
                       relative_error, train_reduced_model)
from .snapshot import CenteredSnapshots, SnapshotSet


def _default_lambda_grid():
    return tuple(np.logspace(-6.0, 3.0, 10))


def _default_gamma_grid():
    return (0.0,) + tuple(np.logspace(-6.0, 3.0, 10))


@dataclass
class Hyperparameters:
    r: int
    q: int
    p: int
    gamma: float
    lambda1: float
    lambda2: float
    lambda3: float


@dataclass
class Grid:
    """Candidate values for the manifold and regression penalties."""

    gamma_values: tuple = field(default_factory=_default_gamma_grid)
    lambda1_values: tuple = field(default_factory=_default_lambda_grid)
    lambda2_values: tuple = field(default_factory=_default_lambda_grid)
    lambda3_values: tuple = field(default_factory=_default_lambda_grid)

    def __post_init__(self):
        for name in ("gamma_values", "lambda1_values", "lambda2_values", "lambda3_values"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise ValueError(f"{name} must be nonempty")
            if any(v < 0 for v in values):
                raise ValueError(f"{name} must be nonnegative")
            setattr(self, name, values)


@dataclass
class TuneRow:
    gamma: float
    lambda1: float
    lambda2: float
    lambda3: float
    error: float
    stable: bool


@dataclass
class TuneResult:
    best: Hyperparameters
    score: float
    table: list


def grid_search(sset: SnapshotSet, cs: CenteredSnapshots, base_cfg: LearnConfig,
                grid: Grid, method: str = "mpod", substeps: int = 10,
                ic_method: str | None = None, manifold_cache: dict | None = None) -> TuneResult:
    """Exhaustive search minimizing training-window relative state error.

    For each gamma the manifold is fit once (and kept in
    ``manifold_cache``, which callers may share); every lambda triple then
    trains operators, integrates all training trajectories, and scores
    against the training snapshots. The best entry minimizes the score
    over stable rows, with ties resolved toward larger (lambda3, lambda2,
    lambda1, gamma).
    """
    ic_method = ic_method or default_ic_method(method)
    cache = manifold_cache if manifold_cache is not None else {}
    table = []
    best_row = None
    best_key = None
    for gamma in grid.gamma_values:
        cfg = replace(base_cfg, gamma=float(gamma))
        if float(gamma) not in cache:
            cache[float(gamma)] = fit_manifold(method, cs, cfg)
        manifold, S_hat, _ = cache[float(gamma)]
        for lam1 in grid.lambda1_values:
            for lam2 in grid.lambda2_values:
                for lam3 in grid.lambda3_values:
                    try:
                        model = train_reduced_model(
                            method, cs, cfg, (lam1, lam2, lam3),
                            manifold=manifold, S_hat=S_hat,
                        )
                        pred = predict_snapshots(model, sset, substeps=substeps,
                                                 ic_method=ic_method)
                        error = relative_error(pred, sset.data, cs.s_ref)
                        stable = bool(np.isfinite(error))
                    except RuntimeError:
                        # unstable integration or unusable regression
                        error, stable = float("inf"), False
                    row = TuneRow(gamma=float(gamma), lambda1=float(lam1),
                                  lambda2=float(lam2), lambda3=float(lam3),
                                  error=error, stable=stable)
                    table.append(row)
                    if stable:
                        key = (error, -lam3, -lam2, -lam1, -gamma)
                        if best_key is None or key < best_key:
                            best_key, best_row = key, row
    if best_row is None:
        raise RuntimeError("no stable model in grid")
    best = Hyperparameters(r=base_cfg.r, q=base_cfg.q, p=base_cfg.p,
                           gamma=best_row.gamma, lambda1=best_row.lambda1,
                           lambda2=best_row.lambda2, lambda3=best_row.lambda3)
    return TuneResult(best=best, score=best_row.error, table=table)


def write_table_csv(result: TuneResult, path) -> None:
    """Dump the full grid as CSV (gamma, lambda1..3, error, stable)."""
    with open(path, "w") as fh:
        fh.write("gamma,lambda1,lambda2,lambda3,error,stable\n")
        for row in result.table:
            fh.write(
                f"{row.gamma:.17g},{row.lambda1:.17g},{row.lambda2:.17g},"
                f"{row.lambda3:.17g},{row.error:.17g},{int(row.stable)}\n"
            )
