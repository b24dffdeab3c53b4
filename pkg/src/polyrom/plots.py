"""Figure rendering for experiment reports.

Every report CSV written by the CLI gets a rendered PNG next to it so a
run directory is reviewable at a glance. Rendering always targets files
(Agg backend); nothing here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_singular_values(spectrum, path, mark: int | None = None) -> str:
    """Normalized singular-value decay on a log scale."""
    s = spectrum.singular_values
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.semilogy(np.arange(1, s.size + 1), s / s[0], "k.-", ms=4, lw=0.8)
    if mark:
        ax.axvline(mark, color="tab:red", lw=0.8, ls="--", label=f"r+q = {mark}")
        ax.legend(frameon=False)
    ax.set_xlabel("singular value index")
    ax.set_ylabel("normalized singular value")
    ax.set_xlim(1, min(s.size, 60))
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_solution_slices(x, slices: dict, path, title: str = "") -> str:
    """Overlaid solution profiles, one panel per time slice.

    ``slices`` maps a time label to {"reference": y, <method>: y, ...}.
    """
    n = len(slices)
    fig, axes = plt.subplots(n, 1, figsize=(5.5, 3 * n), squeeze=False)
    for ax, (label, curves) in zip(axes[:, 0], slices.items()):
        for name, y in curves.items():
            style = dict(lw=2, color="k") if name == "reference" else dict(lw=1.4, ls="--")
            ax.plot(x, y, label=name, **style)
        ax.set_xlabel("x")
        ax.set_ylabel("solution")
        ax.set_title(f"{title} {label}".strip())
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_spacetime(times, x, S, path, title: str = "", train_until: float | None = None) -> str:
    """Space-time heat map of a trajectory matrix (columns are times)."""
    fig, ax = plt.subplots(figsize=(6, 3))
    finite = np.isfinite(S)
    vmin = np.min(S[finite]) if finite.any() else 0.0
    vmax = np.max(S[finite]) if finite.any() else 1.0
    im = ax.imshow(S, aspect="auto", origin="lower",
                   extent=[times[0], times[-1], x[0], x[-1]],
                   vmin=vmin, vmax=vmax, cmap="viridis")
    if train_until is not None:
        ax.axvline(train_until, color="w", ls="--", lw=1)
    ax.set_xlabel("time")
    ax.set_ylabel("x")
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_error_curves(times, errors: dict, path, title: str = "") -> str:
    """Per-snapshot relative error over time for several models."""
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    for name, err in errors.items():
        ax.semilogy(times, err, lw=1.2, label=name)
    ax.set_xlabel("time")
    ax.set_ylabel("relative error")
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_toy_surfaces(data, reconstructions: dict, path) -> str:
    """Original 3-D point cloud against each reconstruction."""
    fig = plt.figure(figsize=(4 * len(reconstructions), 3.6))
    for i, (name, recon) in enumerate(reconstructions.items(), start=1):
        ax = fig.add_subplot(1, len(reconstructions), i, projection="3d")
        ax.scatter(data[0, ::13], data[1, ::13], data[2, ::13],
                   s=3, c="gray", alpha=0.5, label="data")
        ax.scatter(recon[0, ::13], recon[1, ::13], recon[2, ::13],
                   s=3, c="tab:red", alpha=0.5, label=name)
        ax.set_title(name)
        ax.view_init(elev=25, azim=-60)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
