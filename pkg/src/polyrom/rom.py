"""Reduced dynamical systems: right-hand side, integration, prediction.

The reduced state evolves under a polynomial vector field grouped into
constant, linear, unique-quadratic, and higher-order monomial terms. Time
integration is classical fixed-step RK4 with a configurable number of
internal substeps per output interval, chosen for exact reproducibility.
Instability (blow-up or non-finite state) is reported as a structured
error because it is itself a meaningful experimental outcome.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

import numpy as np

from .features import MonomialTable, QuadIndexing, ghat_eval, quad_eval
from .manifold import (EncodeSettings, PolynomialManifold, decode,
                       encode_linear, encode_nls, manifold_from_json_dict,
                       manifold_to_json_dict)
from .opinf import InferredOperators
from .snapshot import smat_decode, smat_encode


class UnstableRomError(RuntimeError):
    """Integration left the stable regime; carries the last valid time."""

    def __init__(self, message: str, last_valid_time: float):
        super().__init__(message)
        self.last_valid_time = last_valid_time


@dataclass
class IntegrationConfig:
    dt_output: float
    substeps: int = 10
    blowup_threshold: float = 1e6

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.dt_output <= 0 or self.blowup_threshold <= 0:
            raise ValueError("dt_output and blowup_threshold must be positive")


@dataclass
class ReducedModel:
    """Inferred operators bound to their manifold and quadratic indexing."""

    ops: InferredOperators
    manifold: PolynomialManifold
    quad_idx: QuadIndexing

    def __post_init__(self):
        if self.ops.r != self.manifold.r:
            raise ValueError("operator dimension disagrees with the manifold")
        if self.quad_idx.r != self.ops.r:
            raise ValueError("quadratic indexing dimension disagrees with operators")
        if self.ops.P_hat is not None and self.ops.table is not None:
            if self.ops.table.p != self.manifold.p:
                raise ValueError("monomial table order disagrees with the manifold")


def rhs(model: ReducedModel, s_hat) -> np.ndarray:
    """Evaluate the polynomial vector field at a reduced state."""
    ops = model.ops
    s_hat = np.asarray(s_hat, dtype=float)
    out = ops.c_hat + ops.A_hat @ s_hat
    if ops.H_hat.shape[1]:
        out = out + ops.H_hat @ quad_eval(s_hat, model.quad_idx)
    if ops.P_hat is not None and ops.P_hat.shape[1]:
        out = out + ops.P_hat @ ghat_eval(s_hat, ops.table)
    return out


def integrate(model: ReducedModel, s_hat0, n_outputs: int,
              cfg: IntegrationConfig) -> np.ndarray:
    """Fixed-step RK4 trajectory; column 0 is the initial state.

    Raises :class:`UnstableRomError` when the state leaves the blow-up
    threshold or becomes non-finite, reporting the last valid output time.
    """
    s = np.asarray(s_hat0, dtype=float).ravel().copy()
    if not np.all(np.isfinite(s)):
        raise ValueError("initial state must be finite")
    out = np.empty((s.size, n_outputs + 1))
    out[:, 0] = s
    h = cfg.dt_output / cfg.substeps
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, n_outputs + 1):
            for _ in range(cfg.substeps):
                k1 = rhs(model, s)
                k2 = rhs(model, s + 0.5 * h * k1)
                k3 = rhs(model, s + 0.5 * h * k2)
                k4 = rhs(model, s + h * k3)
                s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(s)) or np.max(np.abs(s)) > cfg.blowup_threshold:
                t_last = (j - 1) * cfg.dt_output
                raise UnstableRomError(
                    f"unstable ROM: state left the stable regime after t={t_last:.6g}",
                    last_valid_time=t_last,
                )
            out[:, j] = s
    return out


def encode_initial(model: ReducedModel, s0, method: str = "linear",
                   settings: EncodeSettings | None = None) -> np.ndarray:
    """Represent a full-order initial condition in modal coordinates."""
    if method == "linear":
        return encode_linear(model.manifold, np.asarray(s0, dtype=float).ravel())
    if method == "nls":
        return encode_nls(model.manifold, s0, settings).s_hat
    raise ValueError(f"unknown initial-condition method {method!r}")


def predict_full(model: ReducedModel, s0, n_outputs: int, cfg: IntegrationConfig,
                 ic_method: str = "linear",
                 encode_settings: EncodeSettings | None = None) -> np.ndarray:
    """Integrate from an encoded initial condition and decode every column."""
    s_hat0 = encode_initial(model, s0, ic_method, encode_settings)
    traj = integrate(model, s_hat0, n_outputs, cfg)
    out = decode(model.manifold, traj)
    # column 0 is the decoded initial encoding by definition; evaluate it
    # through the vector path so the identity holds bit-exactly
    out[:, 0] = decode(model.manifold, s_hat0)
    return out


def _b64(a: np.ndarray) -> str:
    return base64.b64encode(smat_encode(np.atleast_2d(a))).decode("ascii")


def _un_b64(text: str, source: str) -> np.ndarray:
    return smat_decode(base64.b64decode(text.encode("ascii")), source=source)


def save_reduced_model(model: ReducedModel, path) -> None:
    """Write operators, monomial table, and manifold as one JSON document."""
    ops = model.ops
    obj = {
        "type": "reduced_model",
        "operators": {
            "c_hat": _b64(ops.c_hat.reshape(-1, 1)),
            "A_hat": _b64(ops.A_hat),
            "H_hat": _b64(ops.H_hat) if ops.H_hat.shape[1] else None,
            "P_hat": _b64(ops.P_hat) if ops.P_hat is not None and ops.P_hat.shape[1] else None,
        },
        "monomial_table": ops.table.to_json_dict() if ops.table is not None else None,
        "manifold": manifold_to_json_dict(model.manifold),
    }
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)


def load_reduced_model(path) -> ReducedModel:
    source = str(path)
    with open(path) as fh:
        obj = json.load(fh)
    if obj.get("type") != "reduced_model":
        raise ValueError(f"{source}: not a reduced model document")
    manifold = manifold_from_json_dict(obj["manifold"], source=source)
    r = manifold.r
    blocks = obj["operators"]
    c_hat = _un_b64(blocks["c_hat"], source).ravel()
    A_hat = _un_b64(blocks["A_hat"], source)
    quad_idx = QuadIndexing(r=r)
    if blocks.get("H_hat"):
        H_hat = _un_b64(blocks["H_hat"], source)
    else:
        H_hat = np.zeros((r, 0))
    table = None
    P_hat = None
    if obj.get("monomial_table") is not None:
        table = MonomialTable.from_json_dict(obj["monomial_table"])
    if blocks.get("P_hat"):
        P_hat = _un_b64(blocks["P_hat"], source)
    ops = InferredOperators(c_hat=c_hat, A_hat=A_hat, H_hat=H_hat, P_hat=P_hat, table=table)
    return ReducedModel(ops=ops, manifold=manifold, quad_idx=quad_idx)
