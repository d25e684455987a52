"""Figure rendering for solver traces and experiment tables.

Each function takes already-computed rows and writes a PNG next to the
delimited output; nothing here recomputes anything.  Rendering is
optional everywhere (the CSV files are the primary artifact).
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_trace_figure(rows, path, title=None):
    """Two-panel view of a solver trace: objective and gradient norm.

    Parameters
    ----------
    rows : list of dict
        Parsed trace rows (see ``reports.read_trace_csv``).
    path : str
        Output image path.
    title : str or None
    """
    iters = [r["iter"] for r in rows]
    obj = np.array([r["objective"] for r in rows])
    grad = np.array([r["grad_norm_sq"] for r in rows])
    lmin = [r["lambda_min"] for r in rows]
    lmax = [r["lambda_max"] for r in rows]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    gap = obj - obj.min()
    if np.any(gap > 0):
        ax1.semilogy(iters, np.maximum(gap, 1e-18), lw=1.5,
                     label="objective gap to best")
    else:
        ax1.plot(iters, obj, lw=1.5, label="objective")
    ax1.set_xlabel("iteration")
    ax1.legend(fontsize=8)
    ax1.grid(alpha=0.3)

    ax2.semilogy(iters, np.maximum(grad, 1e-32), lw=1.5, color="tab:red",
                 label="squared grad norm")
    ax2b = ax2.twinx()
    ax2b.plot(iters, lmin, lw=0.8, ls="--", color="tab:gray")
    ax2b.plot(iters, lmax, lw=0.8, ls="--", color="tab:gray",
              label="spectral bounds")
    ax2.set_xlabel("iteration")
    ax2.legend(fontsize=8, loc="upper right")
    ax2.grid(alpha=0.3)

    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_dim_sweep_figure(rows, path):
    """Passes-to-convergence against dimension, one line per target exponent."""
    fig, ax = plt.subplots(figsize=(5, 3.4))
    exponents = sorted({r["r"] for r in rows})
    for r_exp in exponents:
        sub = sorted((row for row in rows if row["r"] == r_exp),
                     key=lambda row: row["d"])
        ax.plot([row["d"] for row in sub], [row["passes"] for row in sub],
                marker="o", label=f"target 1e-{r_exp} of variance")
    ax.set_xlabel("dimension")
    ax.set_ylabel("passes until convergence")
    ax.set_ylim(bottom=0)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_robustness_figure(rows, path):
    """Solution shift against contamination scale for median and barycenter."""
    rows = sorted(rows, key=lambda r: r["scale"])
    scales = [r["scale"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(scales, [r["median_shift"] for r in rows], marker="o",
            label="median shift")
    ax.plot(scales, [r["barycenter_shift"] for r in rows], marker="s",
            label="barycenter shift")
    ax.set_xlabel("contamination scale")
    ax.set_ylabel("W2 shift of the solution")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
