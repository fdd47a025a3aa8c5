"""Figure rendering for the CLI report paths.

Every subcommand that writes a CSV also drops a PNG next to it (unless
--no-plots); plotting is file-only, Agg backend, no display."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fig_solution(sol, audit, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    K = sol.times.size - 1
    picks = sorted({0, K // 4, K // 2, 3 * K // 4, K})
    for k in picks:
        ax1.plot(sol.mesh.nodes, sol.nuU[k], label=f"t={sol.times[k]:.3g}")
    ax1.set_xlabel("x")
    ax1.set_ylabel("nu(u)")
    ax1.legend(fontsize=7)
    ax1.set_title("nu(u) profiles")
    ax2.plot(sol.times, audit.b_trajectory)
    ax2.set_xlabel("t")
    ax2.set_ylabel("integrated potential")
    ax2.set_title("energy trajectory")
    _save(fig, path)


def fig_pair(pair, path, span=3.0):
    from .monotone import B_of_beta_eval

    s = np.linspace(-span, span, 801)
    fig, axes = plt.subplots(2, 2, figsize=(8, 6))
    axes[0, 0].plot(s, np.asarray(pair.beta(s)))
    axes[0, 0].set_title("beta")
    axes[0, 1].plot(s, np.asarray(pair.zeta(s)))
    axes[0, 1].set_title("zeta")
    axes[1, 0].plot(s, np.asarray(pair.nu(s)))
    axes[1, 0].set_title("nu")
    axes[1, 1].plot(s, np.asarray(B_of_beta_eval(pair, s)))
    axes[1, 1].set_title("potential along beta")
    for ax in axes.flat:
        ax.grid(alpha=0.3)
    fig.suptitle(pair.name)
    _save(fig, path)


def fig_sweep(rows, path):
    ns = [r.n for r in rows if r.ok]
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    for name, label in (
        ("sup_l2_nu", "sup-time L2 on nu"),
        ("weak_unif_beta", "weak-uniform on beta"),
        ("w1p_gap_zeta", "W^{1,p} gap on zeta"),
    ):
        vals = [getattr(r, name) for r in rows if r.ok]
        if ns and max(vals) > 0:
            ax.loglog(ns, np.maximum(vals, 1e-300), "o-", label=label)
    ax.set_xlabel("perturbation index n")
    ax.set_ylabel("distance to reference")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    _save(fig, path)


def fig_convergence(cells, errors, path):
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    h = 1.0 / np.asarray(cells, dtype=float)
    ax.loglog(h, errors, "o-", label="sup-time L2 error")
    ax.loglog(h, errors[0] * (h / h[0]) ** 2, "k--", alpha=0.5, label="order 2")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    _save(fig, path)


def fig_dual(rows, path):
    eps = [r.eps for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.loglog(eps, np.maximum([r.bound for r in rows], 1e-300), "o-", label="duality bound")
    ax.loglog(eps, np.maximum([r.witness for r in rows], 1e-300), "s-", label="|witness|")
    ax.set_xlabel("eps")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    _save(fig, path)
