"""Figure builders for the CLI (written to files, never shown interactively)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import p_kappa, q0_bounds
from .model import SpinParams, reconstruct_centerline


def save_figure(fig, path) -> None:
    """Write a figure to `path` (format from the extension, e.g. .svg)."""
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def solve_figure(solution, params: SpinParams):
    """Centerline in the rotating frame plus speed/energy profiles."""
    line = reconstruct_centerline(solution)
    s = np.linspace(solution.breakpoints[0], solution.breakpoints[-1], 400)
    u, q, r, beta = solution.evaluate(s)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(line.x, line.y, "-", color="tab:blue")
    ax1.plot([0], [0], "k+", markersize=8)
    ax1.plot(line.x[0], line.y[0], "ko", markersize=4)
    ax1.set_xlabel("x")
    ax1.set_ylabel("y")
    ax1.set_title("fiber centerline")
    ax1.set_aspect("equal", adjustable="datalim")

    ax2.plot(s, u, label="u (speed)", color="tab:blue")
    ax2.plot(s, q, label="q (internal energy)", color="tab:orange")
    ax2.set_xlabel("arc length s")
    ax2.set_title(
        f"delta={params.delta:g}, eps={params.epsilon:g}, kappa={params.kappa:g}")
    ax2.legend()
    fig.tight_layout()
    return fig


def inviscid_figure(traj, params: SpinParams, traj_kappa0=None):
    """Phase portrait (r, beta) and velocity profile of the inviscid fiber.

    `traj_kappa0` optionally overlays the surface-tension-free run for
    comparison.
    """
    s = np.linspace(traj.span[0], traj.span[1], 400)
    v, r, beta = traj.evaluate(s)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(r, beta, color="tab:blue",
             label=f"kappa={params.kappa:g}")
    ax2.plot(s, v, color="tab:blue", label=f"kappa={params.kappa:g}")
    if traj_kappa0 is not None:
        s0 = np.linspace(traj_kappa0.span[0], traj_kappa0.span[1], 400)
        v0, r0, beta0 = traj_kappa0.evaluate(s0)
        ax1.plot(r0, beta0, "--", color="tab:red", label="kappa=0")
        ax2.plot(s0, v0, "--", color="tab:red", label="kappa=0")
    ax1.set_xlabel("r")
    ax1.set_ylabel("beta")
    ax1.set_title("phase portrait")
    ax1.legend()
    ax2.set_xlabel("arc length s")
    ax2.set_ylabel("v = eps*u")
    ax2.set_title(f"inviscid speed, eps={params.epsilon:g}")
    ax2.legend()
    fig.tight_layout()
    return fig


def sweep_figure(records):
    """Regime map (kappa vs delta/eps^2) and q0 against delta with bounds."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))

    conv = [r for r in records if r.q0 is not None]
    fail = [r for r in records if r.q0 is None]
    if conv:
        ax1.plot([r.params.kappa for r in conv], [r.ratio for r in conv],
                 "o", color="tab:green", markersize=3, label="converged")
    if fail:
        ax1.plot([r.params.kappa for r in fail], [r.ratio for r in fail],
                 "x", color="tab:red", markersize=4, label="no convergence")
    kap = np.linspace(0.0, max([r.params.kappa for r in records] + [0.6]), 200)
    ax1.plot(kap, [p_kappa(k) for k in kap], "k-", label="p(kappa)")
    ax1.set_xlabel("kappa")
    ax1.set_ylabel("delta / eps^2")
    ax1.set_title("existence regime map")
    ax1.legend(fontsize=8)

    groups = {}
    for r in conv:
        groups.setdefault((r.params.epsilon, r.params.kappa), []).append(r)
    for (eps, kap_v), recs in sorted(groups.items()):
        recs = sorted(recs, key=lambda r: r.params.delta)
        deltas = np.array([r.params.delta for r in recs])
        ax2.plot(deltas, [r.q0 for r in recs], "o", markersize=3,
                 label=f"eps={eps:g}, kappa={kap_v:g}")
        if len(deltas) > 1:
            dgrid = np.linspace(deltas.min(), deltas.max(), 200)
            bounds = [q0_bounds(SpinParams(d, eps, kap_v, recs[0].params.length))
                      for d in dgrid]
            ax2.plot(dgrid, [b.lower for b in bounds], "-", color="gray", lw=0.8)
            ax2.plot(dgrid, [b.upper for b in bounds], "-", color="gray", lw=0.8)
    ax2.set_xlabel("delta")
    ax2.set_ylabel("q0")
    ax2.set_title("q0 vs delta with analytic bounds")
    if groups:
        ax2.legend(fontsize=8)
    fig.tight_layout()
    return fig
