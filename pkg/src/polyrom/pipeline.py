"""End-to-end composition: learn a manifold, infer operators, predict.

Three training variants share this plumbing. "opinf" uses a plain linear
basis (q = 0) and no higher-order block; "mpod" and "mam" fit a polynomial
manifold with the POD-based or alternating learner and include the
higher-order monomial block. Initial conditions are encoded linearly
except for "mam", whose coordinates are defined by nonlinear projection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .features import QuadIndexing, ghat_table
from .learn import LearnConfig, learn_am, learn_pod
from .manifold import EncodeSettings, decode
from .opinf import assemble, solve, time_derivatives
from .rom import IntegrationConfig, ReducedModel, encode_initial, integrate
from .snapshot import CenteredSnapshots, SnapshotSet

METHODS = ("opinf", "mpod", "mam")


def default_ic_method(method: str) -> str:
    return "nls" if method == "mam" else "linear"


def fit_manifold(method: str, cs: CenteredSnapshots, cfg: LearnConfig):
    """Fit the representation for a training method; returns
    (manifold, S_hat, report-or-None)."""
    if method == "opinf":
        m, S_hat = learn_pod(cs, replace(cfg, q=0))
        return m, S_hat, None
    if method == "mpod":
        m, S_hat = learn_pod(cs, cfg)
        return m, S_hat, None
    if method == "mam":
        return learn_am(cs, cfg)
    raise ValueError(f"unknown training method {method!r}")


def train_reduced_model(method: str, cs: CenteredSnapshots, cfg: LearnConfig,
                        lambdas, manifold=None, S_hat=None) -> ReducedModel:
    """Infer reduced operators from (possibly pre-fit) manifold coordinates."""
    if manifold is None or S_hat is None:
        manifold, S_hat, _ = fit_manifold(method, cs, cfg)
    derivs = time_derivatives(S_hat, cs.times, cs.trajectory_breaks)
    quad_idx = QuadIndexing(r=cfg.r)
    table = None if method == "opinf" else ghat_table(cfg.r, cfg.p)
    prob = assemble(S_hat, derivs, table, quad_idx, lambdas)
    ops = solve(prob)
    return ReducedModel(ops=ops, manifold=manifold, quad_idx=quad_idx)


def predict_snapshots(model: ReducedModel, sset: SnapshotSet, substeps: int = 10,
                      blowup_threshold: float = 1e6, ic_method: str = "linear",
                      encode_settings: EncodeSettings | None = None) -> np.ndarray:
    """Integrate the ROM from each trajectory's initial snapshot.

    Every trajectory is integrated on its own time grid and decoded; the
    result is a full-state matrix with the same column layout as the data.
    """
    blocks = []
    for start, stop in sset.trajectory_slices():
        t = sset.times[start:stop]
        dt = (t[-1] - t[0]) / (len(t) - 1)
        cfg = IntegrationConfig(dt_output=dt, substeps=substeps,
                                blowup_threshold=blowup_threshold)
        s_hat0 = encode_initial(model, sset.data[:, start], ic_method, encode_settings)
        traj = integrate(model, s_hat0, stop - start - 1, cfg)
        blocks.append(decode(model.manifold, traj))
    return np.hstack(blocks)


def relative_error(prediction: np.ndarray, reference: np.ndarray, s_ref: np.ndarray,
                   columns=None) -> float:
    """Frobenius error of a prediction relative to the centered data norm."""
    if columns is not None:
        prediction = prediction[:, columns]
        reference = reference[:, columns]
    den = np.linalg.norm(reference - s_ref[:, None])
    if den == 0.0:
        raise ValueError("degenerate data")
    return float(np.linalg.norm(reference - prediction) / den)


def per_trajectory_errors(prediction: np.ndarray, sset: SnapshotSet,
                          s_ref: np.ndarray) -> list:
    """Relative state error computed separately for every trajectory."""
    return [
        relative_error(prediction[:, start:stop], sset.data[:, start:stop], s_ref)
        for start, stop in sset.trajectory_slices()
    ]


def training_error(model: ReducedModel, sset: SnapshotSet, substeps: int = 10,
                   ic_method: str = "linear") -> float:
    """Pooled relative state error of ROM predictions over the data."""
    pred = predict_snapshots(model, sset, substeps=substeps, ic_method=ic_method)
    return relative_error(pred, sset.data, model.manifold.s_ref)


@dataclass
class EvaluationMetrics:
    relative_state_error: float
    energy_metric: float | None
    pointwise_error: np.ndarray


def evaluate_prediction(prediction: np.ndarray, reference: np.ndarray,
                        s_ref: np.ndarray, manifold=None) -> EvaluationMetrics:
    """Error metrics between a prediction and reference in full state space.

    When a manifold is supplied the captured-energy fraction of the
    reference data under its linear coordinates is reported as well.
    """
    prediction = np.asarray(prediction, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if prediction.shape != reference.shape:
        raise ValueError("prediction and reference dimensions disagree")
    err = relative_error(prediction, reference, s_ref)
    energy = None
    if manifold is not None:
        from .manifold import encode_linear, energy_metric
        S_hat = encode_linear(manifold, reference)
        energy = energy_metric(manifold, S_hat, reference, s_ref)
    return EvaluationMetrics(
        relative_state_error=err,
        energy_metric=energy,
        pointwise_error=np.abs(prediction - reference),
    )
