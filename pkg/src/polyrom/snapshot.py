"""Snapshot matrices: container types, file formats, centering, spectra.

A snapshot matrix stores one full-order state per column. Multi-trajectory
data lives in a single pooled matrix with explicit break indices, since the
learning algorithms operate on the pooled columns but finite-difference
stencils must never cross a trajectory boundary.

Two on-disk formats are supported. The binary format is magic bytes
``SMAT1\\n``, then rows and cols as unsigned 64-bit little-endian integers,
then rows*cols IEEE-754 float64 little-endian values in column-major
order. The text format is a CSV whose first line is ``rows,cols`` and
whose subsequent lines each hold one snapshot column (transposed for line
length sanity), printed with 17 significant digits so values round-trip
exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SMAT_MAGIC = b"SMAT1\n"
_HEADER_BYTES = len(SMAT_MAGIC) + 16


class MatrixParseError(ValueError):
    """A matrix file failed to parse; the message names the offending
    byte or line offset."""


def _require_nonempty_finite(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    if matrix.size == 0:
        raise ValueError("empty matrix")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix contains non-finite entries")
    return matrix


def smat_encode(matrix) -> bytes:
    """Serialize a matrix to SMAT bytes."""
    matrix = _require_nonempty_finite(matrix)
    n, k = matrix.shape
    return SMAT_MAGIC + struct.pack("<QQ", n, k) + matrix.astype("<f8").tobytes(order="F")


def smat_decode(payload: bytes, source: str = "<bytes>") -> np.ndarray:
    """Deserialize SMAT bytes back into a matrix."""
    if payload[: len(SMAT_MAGIC)] != SMAT_MAGIC:
        raise MatrixParseError(f"{source}: bad magic at byte 0")
    if len(payload) < _HEADER_BYTES:
        raise MatrixParseError(f"{source}: truncated header at byte {len(payload)}")
    n, k = struct.unpack("<QQ", payload[len(SMAT_MAGIC):_HEADER_BYTES])
    expected = _HEADER_BYTES + 8 * n * k
    if len(payload) != expected:
        raise MatrixParseError(
            f"{source}: dimension mismatch, header says {n}x{k} "
            f"({expected} bytes) but file has {len(payload)} bytes"
        )
    flat = np.frombuffer(payload, dtype="<f8", offset=_HEADER_BYTES)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise MatrixParseError(
            f"{source}: non-finite entry at byte {_HEADER_BYTES + 8 * int(bad[0])}"
        )
    return flat.reshape((n, k), order="F").copy()


def save_matrix(matrix, path, fmt: str = "smat") -> None:
    """Write a matrix to disk in the requested format ("smat" or "csv")."""
    matrix = _require_nonempty_finite(matrix)
    path = Path(path)
    if fmt == "smat":
        path.write_bytes(smat_encode(matrix))
    elif fmt == "csv":
        n, k = matrix.shape
        with open(path, "w") as fh:
            fh.write(f"{n},{k}\n")
            for j in range(k):
                fh.write(",".join(format(v, ".17g") for v in matrix[:, j]))
                fh.write("\n")
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def load_matrix(path, fmt: str | None = None) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix`.

    When ``fmt`` is None it is inferred from the file suffix (".csv" means
    CSV, anything else the binary format).
    """
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix == ".csv" else "smat"
    if fmt == "smat":
        return smat_decode(path.read_bytes(), source=str(path))
    if fmt != "csv":
        raise ValueError(f"unknown matrix format {fmt!r}")
    with open(path) as fh:
        header = fh.readline().strip()
        parts = header.split(",")
        try:
            n, k = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise MatrixParseError(f"{path}: line 1: malformed header {header!r}") from None
        matrix = np.empty((n, k))
        for j in range(k):
            line = fh.readline()
            lineno = j + 2
            if not line:
                raise MatrixParseError(f"{path}: line {lineno}: expected {k} data rows, found {j}")
            tokens = line.strip().split(",")
            if len(tokens) != n:
                raise MatrixParseError(
                    f"{path}: line {lineno}: expected {n} values, found {len(tokens)}"
                )
            for i, tok in enumerate(tokens):
                try:
                    v = float(tok)
                except ValueError:
                    raise MatrixParseError(
                        f"{path}: line {lineno}: non-numeric token {tok!r}"
                    ) from None
                if not np.isfinite(v):
                    raise MatrixParseError(f"{path}: line {lineno}: non-finite value {tok!r}")
                matrix[i, j] = v
        if fh.readline().strip():
            raise MatrixParseError(f"{path}: line {k + 2}: trailing data beyond declared {k} rows")
    return matrix


@dataclass
class SnapshotSet:
    """Pooled snapshot matrix plus its time and trajectory metadata.

    ``trajectory_breaks`` holds the column indices where a new trajectory
    starts, so breaks (b1, b2) split columns into [0, b1), [b1, b2), [b2, k).
    ``param_labels`` optionally attaches one scalar parameter per trajectory.
    Instances are treated as immutable after construction.
    """

    data: np.ndarray
    times: np.ndarray
    trajectory_breaks: tuple = ()
    param_labels: tuple | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        self.trajectory_breaks = tuple(int(b) for b in self.trajectory_breaks)
        if self.data.ndim != 2:
            raise ValueError("snapshot data must be a matrix")
        n, k = self.data.shape
        if k < 2:
            raise ValueError("a snapshot set needs at least two columns")
        if self.times.shape != (k,):
            raise ValueError("times must have one entry per snapshot column")
        prev = -1
        for b in self.trajectory_breaks:
            if not (0 < b < k) or b <= prev:
                raise ValueError("trajectory breaks must be strictly increasing and inside (0, k)")
            prev = b
        for start, stop in self.trajectory_slices():
            t = self.times[start:stop]
            if np.any(np.diff(t) <= 0):
                raise ValueError("times must be strictly increasing within each trajectory")
        if self.param_labels is not None:
            self.param_labels = tuple(float(v) for v in self.param_labels)
            if len(self.param_labels) != self.n_trajectories:
                raise ValueError("need one parameter label per trajectory")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def k(self) -> int:
        return self.data.shape[1]

    @property
    def n_trajectories(self) -> int:
        return len(self.trajectory_breaks) + 1

    def trajectory_slices(self) -> list:
        edges = (0,) + self.trajectory_breaks + (self.data.shape[1],)
        return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]


@dataclass
class CenteredSnapshots:
    """Snapshots with a reference state subtracted from every column."""

    centered: np.ndarray
    s_ref: np.ndarray
    times: np.ndarray
    trajectory_breaks: tuple = ()
    param_labels: tuple | None = None

    def __post_init__(self):
        self.centered = np.asarray(self.centered, dtype=float)
        self.s_ref = np.asarray(self.s_ref, dtype=float)
        if self.s_ref.shape != (self.centered.shape[0],):
            raise ValueError("reference state length must match the state dimension")

    def trajectory_slices(self) -> list:
        edges = (0,) + tuple(self.trajectory_breaks) + (self.centered.shape[1],)
        return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]


def center(sset: SnapshotSet, mode: str = "column_mean", vector=None) -> CenteredSnapshots:
    """Subtract a reference state from every snapshot column.

    Modes: "column_mean" uses the arithmetic mean of all columns;
    "initial_condition_mean" averages the first column of each trajectory;
    "custom" uses the supplied vector.
    """
    if mode == "column_mean":
        s_ref = sset.data.mean(axis=1)
    elif mode == "initial_condition_mean":
        starts = [start for start, _ in sset.trajectory_slices()]
        s_ref = sset.data[:, starts].mean(axis=1)
    elif mode == "custom":
        if vector is None:
            raise ValueError("custom centering requires a vector")
        s_ref = np.asarray(vector, dtype=float)
        if s_ref.shape != (sset.n,):
            raise ValueError("custom reference state has the wrong length")
    else:
        raise ValueError(f"unknown centering mode {mode!r}")
    return CenteredSnapshots(
        centered=sset.data - s_ref[:, None],
        s_ref=s_ref,
        times=sset.times,
        trajectory_breaks=sset.trajectory_breaks,
        param_labels=sset.param_labels,
    )


@dataclass
class SvdSpectrum:
    """Singular values of a centered snapshot matrix and the running
    fraction of squared Frobenius norm they capture."""

    singular_values: np.ndarray
    cumulative_energy: np.ndarray

    def energy_at(self, r: int) -> float:
        """Fraction of snapshot energy captured by the leading r modes."""
        if r <= 0:
            return 0.0
        r = min(r, self.cumulative_energy.size)
        return float(self.cumulative_energy[r - 1])


def svd_spectrum(cs: CenteredSnapshots) -> SvdSpectrum:
    """Thin-SVD spectrum of the centered snapshots."""
    if not np.any(cs.centered):
        raise ValueError("degenerate snapshot matrix")
    s = np.linalg.svd(cs.centered, compute_uv=False)
    energy = s * s
    return SvdSpectrum(singular_values=s, cumulative_energy=np.cumsum(energy) / energy.sum())


def save_snapshot_set(sset: SnapshotSet, path, fmt: str = "smat", config: dict | None = None) -> None:
    """Write the snapshot matrix plus a JSON sidecar with its metadata."""
    save_matrix(sset.data, path, fmt)
    sidecar = {
        "times": [float(t) for t in sset.times],
        "trajectory_breaks": list(sset.trajectory_breaks),
        "param_labels": list(sset.param_labels) if sset.param_labels is not None else None,
        "config": config or {},
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)


def load_snapshot_set(path, fmt: str | None = None):
    """Read a snapshot matrix and its sidecar; returns (set, config)."""
    data = load_matrix(path, fmt)
    sidecar_path = Path(str(path) + ".json")
    if sidecar_path.exists():
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
        sset = SnapshotSet(
            data=data,
            times=np.asarray(sidecar["times"], dtype=float),
            trajectory_breaks=tuple(sidecar.get("trajectory_breaks", ())),
            param_labels=tuple(sidecar["param_labels"]) if sidecar.get("param_labels") else None,
        )
        return sset, sidecar.get("config", {})
    sset = SnapshotSet(data=data, times=np.arange(data.shape[1], dtype=float))
    return sset, {}
