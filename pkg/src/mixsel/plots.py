"""File-rendering figure helpers for the report commands.

Every function draws one figure and writes it to ``path``; nothing is ever
shown interactively. The Agg backend is forced before pyplot is imported,
so these work on headless machines.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _finish(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return str(path)


def trace_figure(traces, path) -> str:
    """Log posterior and model size per iteration, one panel each."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for tr in traces:
        label = f"chain {tr.chain_id}"
        ax1.plot(tr.iters, tr.log_posts, lw=0.8, alpha=0.8, label=label)
        ax2.plot(tr.iters, [len(g) for g in tr.gammas], lw=0.8, alpha=0.8)
    ax1.set_ylabel("log posterior (unnorm.)")
    ax2.set_ylabel("model size")
    ax2.set_xlabel("iteration")
    if len(traces) <= 6:
        ax1.legend(loc="lower right", fontsize=8)
    return _finish(fig, path)


def pip_figure(pip, path, beta=None) -> str:
    """Inclusion probabilities as a stem plot, optional coefficient panel."""
    pip = np.asarray(pip)
    n_panels = 2 if beta is not None else 1
    fig, axes = plt.subplots(n_panels, 1, figsize=(8, 3 * n_panels),
                             squeeze=False)
    ax = axes[0, 0]
    ax.vlines(np.arange(pip.size), 0.0, pip, lw=1.0)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("inclusion probability")
    ax.set_xlabel("covariate")
    if beta is not None:
        ax2 = axes[1, 0]
        beta = np.asarray(beta)
        ax2.vlines(np.arange(beta.size), 0.0, beta, lw=1.0, color="tab:red")
        ax2.axhline(0.0, color="black", lw=0.5)
        ax2.set_ylabel("posterior mean coefficient")
        ax2.set_xlabel("covariate")
    return _finish(fig, path)


def landscape_figure(histograms, path) -> str:
    """Histograms of neighborhood log-ratio statistics, one panel per key."""
    keys = list(histograms)
    fig, axes = plt.subplots(1, len(keys), figsize=(4 * len(keys), 3.2),
                             squeeze=False)
    for ax, key in zip(axes[0], keys):
        hist = histograms[key]
        edges = np.asarray(hist["edges"])
        counts = np.asarray(hist["counts"])
        ax.stairs(counts, edges, fill=True, alpha=0.7)
        ax.set_title(key, fontsize=10)
        ax.set_xlabel("log-p ratio")
        ax.set_ylabel("models")
    return _finish(fig, path)


def tv_bound_figure(tv_by_state, bound_by_state, path, alpha=None) -> str:
    """Worst-state TV distance against the certified envelope, log scale."""
    tv = np.asarray(tv_by_state)
    bound = np.asarray(bound_by_state)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    t = np.arange(tv.shape[0])
    ax.semilogy(t, np.maximum(tv, 1e-300), label="worst-state TV")
    label = "bound" if alpha is None else f"bound, alpha={alpha:.6f}"
    ax.semilogy(t, bound, "--", label=label)
    ax.set_xlabel("step")
    ax.set_ylabel("total variation")
    ax.legend()
    return _finish(fig, path)


def escape_figure(ns, escapes, tmixes, path) -> str:
    """Escape probability decay next to the stable exact mixing time."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    for nu, vals in escapes.items():
        ax1.semilogy(ns, vals, "o-", label=f"nu={nu}")
    ax1.set_xlabel("n")
    ax1.set_ylabel("escape probability from the null")
    ax1.legend()
    for nu, vals in tmixes.items():
        ax2.plot(ns, vals, "s-", label=f"nu={nu}")
    ax2.set_xlabel("n")
    ax2.set_ylabel("exact lazy mixing time")
    ax2.set_ylim(bottom=0)
    ax2.legend()
    return _finish(fig, path)


def compare_figure(rows, path) -> str:
    """Per-preset H_max quartiles and ESS per second, side by side."""
    presets = [r["preset"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    med = [r["h_max_median"] for r in rows]
    hi = [r["h_max_q95"] for r in rows]
    x = np.arange(len(presets))
    ax1.bar(x, med, width=0.6, label="median")
    ax1.plot(x, hi, "kv", label="95% quantile")
    ax1.set_yscale("log")
    ax1.set_xticks(x, presets)
    ax1.set_ylabel("iterations to best model")
    ax1.legend(fontsize=8)
    ess = [r.get("ess_per_sec") or 0.0 for r in rows]
    ax2.bar(x, ess, width=0.6, color="tab:green")
    ax2.set_xticks(x, presets)
    ax2.set_ylabel("ESS per second")
    return _finish(fig, path)
