"""Polynomial manifolds: decoding, encoding, and representation metrics.

A manifold maps r modal coordinates to a full state through a reference
state, a primary orthonormal basis V, and a secondary orthonormal basis
V_bar whose contribution is a fixed linear combination (rows of Xi) of the
elementwise powers of the modal coordinates. With q = 0 the object
degenerates to a plain linear subspace.
"""

from __future__ import annotations

import base64
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .features import g_eval
from .snapshot import smat_decode, smat_encode

ORTHO_WARN = 1e-8
ORTHO_REJECT = 1e-6


class EncodeDivergedError(RuntimeError):
    """The nonlinear encoder produced a non-finite iterate."""


@dataclass
class PolynomialManifold:
    """The decoder tuple (s_ref, V, V_bar, Xi, p).

    The stacked basis [V V_bar] is expected to have orthonormal columns;
    learners construct it that way and :func:`load_model` validates it.
    Instances are immutable by convention and safe to share.
    """

    s_ref: np.ndarray
    V: np.ndarray
    V_bar: np.ndarray
    Xi: np.ndarray
    p: int

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("polynomial order p must be >= 2")
        self.s_ref = np.asarray(self.s_ref, dtype=float).ravel()
        self.V = np.asarray(self.V, dtype=float).reshape(self.s_ref.size, -1)
        self.V_bar = np.asarray(self.V_bar, dtype=float).reshape(self.s_ref.size, -1)
        width = (self.p - 1) * self.V.shape[1]
        self.Xi = np.asarray(self.Xi, dtype=float).reshape(self.V_bar.shape[1], width)
        n = self.s_ref.size
        if self.V.shape[0] != n:
            raise ValueError("V row count must match the state dimension")
        if self.Xi.shape != (self.q, (self.p - 1) * self.r):
            raise ValueError("Xi must be q x (p-1)r")

    @property
    def n(self) -> int:
        return self.s_ref.size

    @property
    def r(self) -> int:
        return self.V.shape[1]

    @property
    def q(self) -> int:
        return self.V_bar.shape[1]

    def basis(self) -> np.ndarray:
        return np.hstack([self.V, self.V_bar])

    def orthonormality_error(self) -> float:
        omega = self.basis()
        return float(np.max(np.abs(omega.T @ omega - np.eye(omega.shape[1]))))


@dataclass
class EncodeSettings:
    """Controls for the nonlinear least-squares encoder."""

    function_tolerance: float = 1e-9
    max_iterations: int = 200
    initial_guess: np.ndarray | None = None

    def __post_init__(self):
        if self.function_tolerance <= 0:
            raise ValueError("function tolerance must be positive")


@dataclass
class EncodeResult:
    s_hat: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool


def decode(m: PolynomialManifold, s_hat) -> np.ndarray:
    """Map modal coordinates (vector or matrix of columns) to full states."""
    s_hat = np.asarray(s_hat, dtype=float)
    out = m.V @ s_hat
    if m.q:
        out = out + m.V_bar @ (m.Xi @ g_eval(s_hat, m.p))
    if s_hat.ndim == 1:
        return m.s_ref + out
    return m.s_ref[:, None] + out


def encode_linear(m: PolynomialManifold, s) -> np.ndarray:
    """Orthogonal projection onto the primary basis: V^T (s - s_ref)."""
    s = np.asarray(s, dtype=float)
    shift = m.s_ref if s.ndim == 1 else m.s_ref[:, None]
    return m.V.T @ (s - shift)


def _xi_gjac(Xi: np.ndarray, s_hat: np.ndarray, p: int) -> np.ndarray:
    """Product of Xi with the (block-diagonal) power-map Jacobian."""
    r = s_hat.size
    out = np.zeros((Xi.shape[0], r))
    pw = s_hat  # s^(j-1)
    for j in range(2, p + 1):
        out += Xi[:, (j - 2) * r:(j - 1) * r] * (j * pw)
        pw = pw * s_hat
    return out


def encode_nls(m: PolynomialManifold, s, settings: EncodeSettings | None = None) -> EncodeResult:
    """Project a state onto the manifold by damped Gauss-Newton.

    Minimizes 0.5 * ||s - s_ref - V x - V_bar Xi g(x)||^2 over the modal
    coordinates x, starting from the linear projection unless an initial
    guess is supplied. Steps are Levenberg-Marquardt damped (damping 1e-3,
    grown tenfold on rejection, shrunk tenfold on acceptance) and only
    improving steps are accepted, so the objective at the output never
    exceeds the objective at the initial guess. Convergence is declared
    when the objective decrease falls below
    function_tolerance * max(1, objective).
    """
    settings = settings or EncodeSettings()
    s = np.asarray(s, dtype=float).ravel()
    shifted = s - m.s_ref
    if settings.initial_guess is None:
        x = m.V.T @ shifted
    else:
        x = np.asarray(settings.initial_guess, dtype=float).ravel().copy()

    def residual(z):
        res = shifted - m.V @ z
        if m.q:
            res = res - m.V_bar @ (m.Xi @ g_eval(z, m.p))
        return res

    res = residual(x)
    if not np.all(np.isfinite(res)):
        raise EncodeDivergedError("encode diverged")
    obj = 0.5 * float(res @ res)
    lam = 1e-3
    eye = np.eye(m.r)
    iterations = 0
    converged = False
    for iterations in range(1, settings.max_iterations + 1):
        jac = -m.V
        if m.q:
            jac = jac - m.V_bar @ _xi_gjac(m.Xi, x, m.p)
        grad = jac.T @ res
        jtj = jac.T @ jac
        accepted = False
        while lam < 1e15:
            try:
                step = np.linalg.solve(jtj + lam * eye, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = x + step
            cres = residual(cand)
            cobj = 0.5 * float(cres @ cres) if np.all(np.isfinite(cres)) else np.inf
            if cobj < obj:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no improving step at any damping: stationary to working precision
            converged = True
            break
        decrease = obj - cobj
        x, res, obj = cand, cres, cobj
        lam = max(lam / 10.0, 1e-15)
        if not np.all(np.isfinite(x)):
            raise EncodeDivergedError("encode diverged")
        if decrease <= settings.function_tolerance * max(1.0, obj):
            converged = True
            break
    return EncodeResult(
        s_hat=x,
        residual_norm=float(np.sqrt(2.0 * obj)),
        iterations=iterations,
        converged=converged,
    )


def encode_columns(m: PolynomialManifold, S, settings: EncodeSettings | None = None,
                   warm_starts=None) -> np.ndarray:
    """Encode every column of S; one independent problem per column.

    ``warm_starts`` optionally supplies an r x k matrix of initial guesses.
    """
    settings = settings or EncodeSettings()
    S = np.asarray(S, dtype=float)
    k = S.shape[1]
    out = np.empty((m.r, k))
    for j in range(k):
        guess = None if warm_starts is None else warm_starts[:, j]
        col_settings = EncodeSettings(
            function_tolerance=settings.function_tolerance,
            max_iterations=settings.max_iterations,
            initial_guess=guess if guess is not None else settings.initial_guess,
        )
        out[:, j] = encode_nls(m, S[:, j], col_settings).s_hat
    return out


def _representation(m: PolynomialManifold, S_hat: np.ndarray) -> np.ndarray:
    """The centered reconstruction V S_hat + V_bar Xi g(S_hat)."""
    rep = m.V @ S_hat
    if m.q:
        rep = rep + m.V_bar @ (m.Xi @ g_eval(S_hat, m.p))
    return rep


def relative_state_error(m: PolynomialManifold, S_hat, S, s_ref=None) -> float:
    """Frobenius reconstruction error relative to the centered data norm."""
    S = np.asarray(S, dtype=float)
    ref = m.s_ref if s_ref is None else np.asarray(s_ref, dtype=float)
    den = np.linalg.norm(S - ref[:, None])
    if den == 0.0:
        raise ValueError("degenerate data")
    recon = ref[:, None] + _representation(m, np.asarray(S_hat, dtype=float))
    return float(np.linalg.norm(S - recon) / den)


def energy_metric(m: PolynomialManifold, S_hat, S, s_ref=None) -> float:
    """Fraction of centered-data energy carried by the representation."""
    S = np.asarray(S, dtype=float)
    ref = m.s_ref if s_ref is None else np.asarray(s_ref, dtype=float)
    den = np.linalg.norm(S - ref[:, None]) ** 2
    if den == 0.0:
        raise ValueError("degenerate data")
    rep = _representation(m, np.asarray(S_hat, dtype=float))
    return float(np.linalg.norm(rep) ** 2 / den)


def _b64_matrix(a: np.ndarray) -> str:
    return base64.b64encode(smat_encode(np.atleast_2d(a))).decode("ascii")


def _un_b64(text: str, source: str) -> np.ndarray:
    return smat_decode(base64.b64decode(text.encode("ascii")), source=source)


def manifold_to_json_dict(m: PolynomialManifold) -> dict:
    obj = {
        "type": "polynomial_manifold",
        "n": m.n,
        "r": m.r,
        "q": m.q,
        "p": m.p,
        "s_ref": _b64_matrix(m.s_ref.reshape(-1, 1)),
        "V": _b64_matrix(m.V),
        "V_bar": _b64_matrix(m.V_bar) if m.q else None,
        "Xi": _b64_matrix(m.Xi) if m.q else None,
    }
    return obj


def manifold_from_json_dict(obj: dict, source: str = "<json>") -> PolynomialManifold:
    if obj.get("type") != "polynomial_manifold":
        raise ValueError(f"{source}: not a polynomial manifold document")
    n, r, q, p = (int(obj[key]) for key in ("n", "r", "q", "p"))
    s_ref = _un_b64(obj["s_ref"], source).ravel()
    V = _un_b64(obj["V"], source)
    if q:
        V_bar = _un_b64(obj["V_bar"], source)
        Xi = _un_b64(obj["Xi"], source)
    else:
        V_bar = np.zeros((n, 0))
        Xi = np.zeros((0, (p - 1) * r))
    m = PolynomialManifold(s_ref=s_ref, V=V, V_bar=V_bar, Xi=Xi, p=p)
    if (m.n, m.r, m.q) != (n, r, q):
        raise ValueError(f"{source}: matrix shapes disagree with declared dimensions")
    err = m.orthonormality_error()
    if err > ORTHO_REJECT:
        raise ValueError(f"{source}: non-orthonormal basis (error {err:.3g})")
    if err > ORTHO_WARN:
        warnings.warn(f"{source}: basis orthonormality error {err:.3g}", stacklevel=2)
    return m


def save_model(m: PolynomialManifold, path) -> None:
    """Write the manifold as a JSON document with embedded matrices."""
    with open(path, "w") as fh:
        json.dump(manifold_to_json_dict(m), fh, indent=1, sort_keys=True)


def load_model(path) -> PolynomialManifold:
    """Read a manifold, validating shapes and basis orthonormality."""
    with open(path) as fh:
        obj = json.load(fh)
    return manifold_from_json_dict(obj, source=str(path))
