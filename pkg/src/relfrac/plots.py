"""Figure rendering for scenario outputs (written next to the CSV/JSON)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, out, name, artifacts):
    path = os.path.join(out, name)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    artifacts.append(path)


def plot_trace(trace, out, artifacts):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    r = trace.r_values
    ax1.loglog(r, trace.H, "o-", ms=3, label="H(r)")
    ax1.loglog(r, np.abs(trace.D), "s--", ms=3, label="|D(r)|")
    ax1.set_xlabel("r")
    ax1.legend(frameon=False)
    ax1.set_title("boundary mass and energy")
    ax2.semilogx(r, trace.Nfreq, "o-", ms=3)
    if np.isfinite(trace.gamma_fit):
        ax2.axhline(trace.gamma_fit, color="k", lw=0.8, ls=":",
                    label=f"fitted gamma = {trace.gamma_fit:.4f}")
        ax2.legend(frameon=False)
    ax2.set_xlabel("r")
    ax2.set_ylabel("N(r)")
    ax2.set_title("frequency quotient")
    _save(fig, out, "frequency_trace.png", artifacts)


def plot_blowup(rep, out, artifacts):
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    tau = np.asarray(rep["tau"])
    d = np.asarray(rep["distance"])
    mask = d > 0
    if np.any(mask):
        ax.loglog(tau[mask], d[mask], "o-")
    ax.set_xlabel("tau")
    ax.set_ylabel("weighted L2 distance")
    rate = rep.get("fitted_rate")
    ax.set_title(f"blow-up convergence (rate {rate:.2f})" if rate == rate
                 else "blow-up convergence")
    _save(fig, out, "blowup.png", artifacts)


def plot_eigentable(table, out, artifacts):
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ls = [row["l"] for row in table]
    mus = [row["mu"] for row in table]
    ax.plot(ls, mus, "o")
    ax.set_xlabel("sector l")
    ax.set_ylabel("mu")
    ax.set_title("angular eigenvalues")
    _save(fig, out, "eigenvalues.png", artifacts)


def plot_solution(sol, out, artifacts):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    rho = sol.grid.rho_nodes
    alpha = sol.grid.alpha_centers
    T = rho[:, None] * np.cos(alpha[None, :])
    X = rho[:, None] * np.sin(alpha[None, :])
    pc = ax.pcolormesh(X, T, sol.values, shading="gouraud", cmap="RdBu_r")
    fig.colorbar(pc, ax=ax, label="w")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_aspect("equal")
    ax.set_title("extended solution on the half-disk")
    _save(fig, out, "solution.png", artifacts)


def plot_kernel_rows(rows, out, artifacts):
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ts = [row["t"] for row in rows]
    gaps = [row["rel_gap"] for row in rows]
    ax.semilogy(ts, np.maximum(gaps, 1e-18), "o-")
    ax.set_xlabel("t")
    ax.set_ylabel("relative mass defect")
    ax.set_title("kernel normalization vs theta(mt)")
    _save(fig, out, "kernel_mass.png", artifacts)


def render_scenario(name, payload, out):
    """Render the figures a scenario's payload supports; returns paths."""
    artifacts = []
    if "_trace" in payload:
        plot_trace(payload["_trace"], out, artifacts)
    if "_blowup" in payload:
        plot_blowup(payload["_blowup"], out, artifacts)
    if "_solution" in payload:
        plot_solution(payload["_solution"], out, artifacts)
    if name == "angular" and "eigentable" in payload:
        plot_eigentable(payload["eigentable"], out, artifacts)
    if name == "kernel_test" and "normalization" in payload:
        plot_kernel_rows(payload["normalization"], out, artifacts)
    return artifacts
