"""Polynomial feature algebra for reduced-state vectors.

Three feature families enter the reduced models: the stack of elementwise
powers of the reduced state, the unique quadratic products, and the table
of higher-order monomials (degree 3 through 2p) that appear when a
quadratic system is pushed through a degree-p polynomial embedding.

All evaluation routines accept either a length-r vector or an r x k matrix
whose columns are reduced states; powers are built by repeated
multiplication so results are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def g_eval(s_hat, p: int) -> np.ndarray:
    """Stack the elementwise powers s^2, s^3, ..., s^p of the reduced state.

    Parameters
    ----------
    s_hat : (r,) or (r, k) array
        Reduced state vector, or matrix of reduced states as columns.
    p : int
        Polynomial order, at least 2.

    Returns
    -------
    ((p-1)*r,) or ((p-1)*r, k) array with the power blocks concatenated in
    increasing power order.
    """
    if p < 2:
        raise ValueError("polynomial order p must be >= 2")
    s_hat = np.asarray(s_hat, dtype=float)
    blocks = []
    cur = s_hat * s_hat
    blocks.append(cur)
    for _ in range(3, p + 1):
        cur = cur * s_hat
        blocks.append(cur)
    return np.concatenate(blocks, axis=0)


def g_jacobian(s_hat, p: int) -> np.ndarray:
    """Jacobian of :func:`g_eval` with respect to the reduced state.

    Block j (the rows for power j) is diagonal with entries j * s_i^(j-1);
    all cross entries are zero.
    """
    if p < 2:
        raise ValueError("polynomial order p must be >= 2")
    s_hat = np.asarray(s_hat, dtype=float).ravel()
    r = s_hat.size
    jac = np.zeros(((p - 1) * r, r))
    rows = np.arange(r)
    pw = s_hat  # running power s^(j-1)
    for j in range(2, p + 1):
        jac[(j - 2) * r + rows, rows] = j * pw
        pw = pw * s_hat
    return jac


@dataclass
class QuadIndexing:
    """Canonical ordering of the r(r+1)/2 unique quadratic products.

    Pairs (i, j) with i <= j are listed with i ascending, then j ascending,
    so each unordered product s_i * s_j appears exactly once.
    """

    r: int
    pairs: tuple = ()
    rows: np.ndarray = field(repr=False, default=None)
    cols: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not self.pairs:
            self.pairs = tuple(
                (i, j) for i in range(self.r) for j in range(i, self.r)
            )
        self.rows = np.array([i for i, _ in self.pairs], dtype=np.intp)
        self.cols = np.array([j for _, j in self.pairs], dtype=np.intp)

    @property
    def size(self) -> int:
        return len(self.pairs)


def quad_eval(s_hat, idx: QuadIndexing) -> np.ndarray:
    """Unique quadratic products s_i * s_j, (i, j) in canonical pair order."""
    s_hat = np.asarray(s_hat, dtype=float)
    if s_hat.shape[0] != idx.r:
        raise ValueError(f"state has {s_hat.shape[0]} entries, index expects {idx.r}")
    return s_hat[idx.rows] * s_hat[idx.cols]


@dataclass
class MonomialTable:
    """Ordered exponent table for the higher-order monomial vector.

    Each row of ``exponents`` is a length-r vector of nonnegative integer
    powers. Rows are sorted by total degree ascending, then by exponent
    vector lexicographically descending, which fixes the operator column
    layout once and for all.
    """

    r: int
    p: int
    exponents: np.ndarray

    def __post_init__(self):
        self.exponents = np.asarray(self.exponents, dtype=np.uint8)
        if self.exponents.ndim != 2 or self.exponents.shape[1] != self.r:
            raise ValueError("exponent table shape inconsistent with r")

    def __len__(self) -> int:
        return self.exponents.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.exponents.sum(axis=1, dtype=int)

    def to_json_dict(self) -> dict:
        return {
            "r": self.r,
            "p": self.p,
            "exponents": self.exponents.astype(int).tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MonomialTable":
        return cls(r=int(obj["r"]), p=int(obj["p"]),
                   exponents=np.asarray(obj["exponents"], dtype=np.uint8))


def ghat_table(r: int, p: int) -> MonomialTable:
    """Build the canonical table of higher-order monomials for (r, p).

    The entries are the monomials produced by the quadratic interactions of
    a linear-plus-powers state expansion: products s_i * s_j^b for
    b in [2, p] and products s_i^a * s_j^b for a, b in [2, p], over all
    component pairs, deduplicated. Degrees run from 3 to 2p; the pure
    linear and quadratic monomials live in their own model blocks and are
    excluded by construction.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if p < 2:
        raise ValueError("polynomial order p must be >= 2")
    if 2 * p > 255:
        raise ValueError("polynomial order too large for uint8 exponents")
    seen = set()
    for i in range(r):
        for j in range(r):
            for b in range(2, p + 1):
                e = [0] * r
                e[j] += b
                e[i] += 1
                seen.add(tuple(e))
                for a in range(2, p + 1):
                    e2 = [0] * r
                    e2[i] += a
                    e2[j] += b
                    seen.add(tuple(e2))
    ordered = sorted(seen, key=lambda e: (sum(e), tuple(-x for x in e)))
    return MonomialTable(r=r, p=p, exponents=np.array(ordered, dtype=np.uint8))


def _power_cache(s_hat: np.ndarray, max_exponent: int) -> np.ndarray:
    """Cumulative powers pw[e] = s**e computed by repeated multiplication."""
    pw = np.ones((max_exponent + 1,) + s_hat.shape)
    for e in range(1, max_exponent + 1):
        pw[e] = pw[e - 1] * s_hat
    return pw


def ghat_eval(s_hat, table: MonomialTable) -> np.ndarray:
    """Evaluate every monomial in the table at the reduced state."""
    s_hat = np.asarray(s_hat, dtype=float)
    if s_hat.shape[0] != table.r:
        raise ValueError(f"state has {s_hat.shape[0]} entries, table expects {table.r}")
    exps = table.exponents
    pw = _power_cache(s_hat, int(exps.max(initial=0)))
    out = np.ones((len(table),) + s_hat.shape[1:])
    for i in range(table.r):
        out = out * pw[exps[:, i], i]
    return out


def ghat_jacobian(s_hat, table: MonomialTable) -> np.ndarray:
    """Jacobian of :func:`ghat_eval`; entry (m, i) follows the power rule.

    Zero exponents contribute zero columns (the derivative multiplier is
    the exponent itself), so states with zero components stay finite.
    """
    s_hat = np.asarray(s_hat, dtype=float).ravel()
    exps = table.exponents.astype(np.int64)
    d, r = exps.shape
    pw = _power_cache(s_hat, int(exps.max(initial=0)))
    jac = np.empty((d, r))
    for i in range(r):
        reduced = exps.copy()
        reduced[:, i] = np.maximum(reduced[:, i] - 1, 0)
        term = np.ones(d)
        for col in range(r):
            term = term * pw[reduced[:, col], col]
        jac[:, i] = exps[:, i] * term
    return jac
