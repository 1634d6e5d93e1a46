"""Matplotlib figures written next to the CLI's CSV/JSON output."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(
        {
            "figure.figsize": (6.0, 4.0),
            "axes.spines.top": False,
            "axes.spines.right": False,
            "font.size": 10,
        }
    )
    return plt


def plot_result(result, path) -> Path:
    """Histogram of per-trial values with the pooled mean and the theory value."""
    plt = _pyplot()
    vals = result.per_trial_values[np.isfinite(result.per_trial_values)]
    fig, ax = plt.subplots()
    bins = min(40, max(5, int(np.sqrt(vals.size)) + 1))
    ax.hist(vals, bins=bins, color="0.75", edgecolor="0.4")
    ax.axvline(result.theory_value, color="C3", lw=2, label=f"theory {result.theory_value:.5g}")
    ax.axvline(result.estimate_mean, color="C0", lw=2, ls="--", label=f"mean {result.estimate_mean:.5g}")
    ax.set_xlabel(f"{result.config.mode} per trial")
    ax.set_ylabel("trials")
    ax.set_title(f"{result.config.topology}, sigma_b={result.config.sigma_b:g}")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_density(layers, xs, sigma_b: float, path) -> Path:
    from .gp_theory import crossing_density

    plt = _pyplot()
    fig, ax = plt.subplots()
    xs = np.asarray(xs, dtype=float)
    for ell in layers:
        ax.plot(xs, crossing_density(ell, xs, sigma_b), marker="." if xs.size < 30 else None, label=f"layer {ell}")
    ax.set_xlabel("x")
    ax.set_ylabel("expected crossings per unit length")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_sparsity(phi, target, report, path) -> Path:
    """Target samples, the network function and the ``alpha * eps0`` band."""
    plt = _pyplot()
    a, b = target.domain
    grid = np.union1d(target.xs, phi.knots[(phi.knots > a) & (phi.knots < b)])
    tol = report.alpha * report.eps0
    fig, ax = plt.subplots()
    ax.fill_between(target.xs, target.ys - tol, target.ys + tol, color="C0", alpha=0.2, lw=0)
    ax.plot(target.xs, target.ys, color="C0", label="target")
    ax.plot(grid, phi(grid), color="C3", label="network")
    ax.set_xlabel("x")
    ax.set_title(f"L_min={report.l_min}, eta={report.eta_region:.3g}, sup err={report.sup_error:.3g}")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
