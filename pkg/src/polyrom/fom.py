"""Desk-scale data generators for the benchmark studies.

Three sources of snapshot data: a closed-form 3-D surface sampled on a
parameter grid, a one-dimensional bistable reaction-diffusion problem
(semi-implicit finite differences, Dirichlet boundaries), and a periodic
dispersive wave equation (pseudospectral in space, exponential
time-differencing RK4 in time). All generators are deterministic:
identical configurations produce bit-identical snapshot matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from .snapshot import SnapshotSet


def toy_manifold_data() -> np.ndarray:
    """Samples of the surface (x, y, sin(x)cos(y)) on [0,4]^2.

    The grid spacing is 0.1 in both directions (41 x 41 = 1681 points);
    columns are ordered x-major, then y.
    """
    grid = np.linspace(0.0, 4.0, 41)
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    x, y = X.ravel(), Y.ravel()
    return np.vstack([x, y, np.sin(x) * np.cos(y)])


def toy_snapshot_set() -> SnapshotSet:
    """The toy surface wrapped as a single-trajectory snapshot set."""
    data = toy_manifold_data()
    return SnapshotSet(data=data, times=np.arange(data.shape[1], dtype=float))


@dataclass
class AllenCahnConfig:
    """Bistable reaction-diffusion on [-1, 1] with pinned boundaries.

    The interface parameter kappa controls the transition-layer width;
    mu parameterizes the initial condition
    s(x, 0) = mu x + (1 - mu) sin(-1.5 pi x), which already satisfies the
    boundary values s(-1) = -1 and s(1) = 1.
    """

    kappa: float = 0.01
    mu: float = 0.5
    n: int = 512
    t_record: float = 0.1
    t_final: float = 60.0
    internal_dt: float = 0.005

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.n < 8:
            raise ValueError("need at least 8 grid points")
        ratio = self.t_record / self.internal_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("internal_dt must divide t_record")


def allen_cahn_simulate(cfg: AllenCahnConfig) -> SnapshotSet:
    """One trajectory of the reaction-diffusion problem.

    Diffusion is treated implicitly (one sparse factorization reused for
    every step), the cubic reaction explicitly. Snapshots are recorded
    every t_record time units from t = 0 through t_final inclusive.
    """
    n = cfg.n
    x = np.linspace(-1.0, 1.0, n)
    h = x[1] - x[0]
    dt = cfg.internal_dt
    s = cfg.mu * x + (1.0 - cfg.mu) * np.sin(-1.5 * np.pi * x)
    s[0], s[-1] = -1.0, 1.0
    steps_per_record = round(cfg.t_record / dt)
    n_records = round(cfg.t_final / cfg.t_record)
    c = dt * cfg.kappa / h**2
    interior = n - 2
    lhs = diags(
        [np.full(interior - 1, -c), np.full(interior, 1.0 + 2.0 * c), np.full(interior - 1, -c)],
        offsets=(-1, 0, 1), format="csc",
    )
    lu = splu(lhs)
    snaps = np.empty((n, n_records + 1))
    snaps[:, 0] = s
    for rec in range(1, n_records + 1):
        for _ in range(steps_per_record):
            u = s[1:-1]
            b = u + dt * (u - u**3)
            b[0] += c * s[0]
            b[-1] += c * s[-1]
            s[1:-1] = lu.solve(b)
        if not np.all(np.isfinite(s)):
            raise RuntimeError(f"reaction-diffusion solver diverged at t={rec * cfg.t_record:.4g}")
        snaps[:, rec] = s
    times = np.arange(n_records + 1) * cfg.t_record
    return SnapshotSet(data=snaps, times=times, param_labels=(cfg.mu,))


def allen_cahn_dataset(mus, cfg: AllenCahnConfig | None = None) -> SnapshotSet:
    """Pool one trajectory per parameter value into a single snapshot set."""
    from dataclasses import replace

    cfg = cfg or AllenCahnConfig()
    blocks, times, breaks = [], [], []
    offset = 0
    for mu in mus:
        traj = allen_cahn_simulate(replace(cfg, mu=float(mu)))
        blocks.append(traj.data)
        times.append(traj.times)
        offset += traj.k
        breaks.append(offset)
    return SnapshotSet(
        data=np.hstack(blocks),
        times=np.concatenate(times),
        trajectory_breaks=tuple(breaks[:-1]),
        param_labels=tuple(float(mu) for mu in mus),
    )


def lift(S) -> np.ndarray:
    """Exact quadratic lifting: stack the state with its elementwise square."""
    S = np.asarray(S, dtype=float)
    return np.concatenate([S, S * S], axis=0)


@dataclass
class KdvConfig:
    """Single propagating soliton on a periodic domain [-pi, pi].

    The initial condition 1 + 24 sech^2(sqrt(8) x) rides on a unit
    pedestal; with alpha = 4, beta = 1 it translates shape-invariantly.
    """

    alpha: float = 4.0
    beta: float = 1.0
    n: int = 256
    t_record: float = 0.0002
    t_final: float = 1.0
    internal_dt: float = 1e-5

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError("grid size must be a power of two")
        ratio = self.t_record / self.internal_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("internal_dt must divide t_record")


def kdv_grid(n: int) -> np.ndarray:
    return -np.pi + 2.0 * np.pi * np.arange(n) / n


def kdv_initial_condition(x: np.ndarray) -> np.ndarray:
    return 1.0 + 24.0 / np.cosh(np.sqrt(8.0) * x) ** 2


def _etdrk4_coefficients(L: np.ndarray, dt: float, n_contour: int = 64):
    """Exponential time-differencing RK4 weights via contour averaging.

    The phi functions are evaluated stably by averaging over points on a
    unit circle around each dt*L value; the linear operator here is purely
    imaginary so the full complex circle is used.
    """
    E = np.exp(dt * L)
    E2 = np.exp(0.5 * dt * L)
    theta = (np.arange(1, n_contour + 1) - 0.5) / n_contour
    circle = np.exp(2j * np.pi * theta)
    z = dt * L[:, None] + circle[None, :]
    Q = dt * np.mean((np.exp(z / 2.0) - 1.0) / z, axis=1)
    f1 = dt * np.mean((-4.0 - z + np.exp(z) * (4.0 - 3.0 * z + z**2)) / z**3, axis=1)
    f2 = dt * np.mean((2.0 + z + np.exp(z) * (-2.0 + z)) / z**3, axis=1)
    f3 = dt * np.mean((-4.0 - 3.0 * z - z**2 + np.exp(z) * (4.0 - z)) / z**3, axis=1)
    return E, E2, Q, f1, f2, f3


def kdv_simulate(cfg: KdvConfig) -> SnapshotSet:
    """Pseudospectral solve with 2/3-rule dealiasing and ETDRK4 stepping."""
    n = cfg.n
    x = kdv_grid(n)
    dt = cfg.internal_dt
    k = np.fft.fftfreq(n, d=1.0 / n)
    L = 1j * cfg.beta * k**3
    E, E2, Q, f1, f2, f3 = _etdrk4_coefficients(L, dt)
    dealias = np.abs(k) <= n / 3.0
    ik = 1j * k
    half_alpha = 0.5 * cfg.alpha

    def nonlinear(vh):
        u = np.real(np.fft.ifft(vh))
        return -half_alpha * ik * (dealias * np.fft.fft(u * u))

    steps_per_record = round(cfg.t_record / dt)
    n_records = round(cfg.t_final / cfg.t_record)
    v = np.fft.fft(kdv_initial_condition(x))
    snaps = np.empty((n, n_records + 1))
    snaps[:, 0] = np.real(np.fft.ifft(v))
    for rec in range(1, n_records + 1):
        for _ in range(steps_per_record):
            Nv = nonlinear(v)
            a = E2 * v + Q * Nv
            Na = nonlinear(a)
            b = E2 * v + Q * Na
            Nb = nonlinear(b)
            cnode = E2 * a + Q * (2.0 * Nb - Nv)
            Nc = nonlinear(cnode)
            v = E * v + f1 * Nv + 2.0 * f2 * (Na + Nb) + f3 * Nc
        u = np.real(np.fft.ifft(v))
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 1e6:
            raise RuntimeError(f"wave solver diverged at t={rec * cfg.t_record:.4g}")
        snaps[:, rec] = u
    times = np.arange(n_records + 1) * cfg.t_record
    return SnapshotSet(data=snaps, times=times)
