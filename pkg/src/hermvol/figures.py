"""Report figures rendered beside the primary outputs.

Every renderer takes plain arrays/records and a target path, draws with
the Agg backend, and returns the written path. Nothing here feeds back
into estimation; deleting the figures loses no information.
"""

from __future__ import annotations

import logging

import matplotlib

matplotlib.use("Agg")
logging.getLogger("matplotlib").setLevel(logging.WARNING)

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_fit", "render_selection", "render_curve", "render_simulation"]

_BAND_KW = dict(alpha=0.25, linewidth=0)


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_simulation(labels, y, x, path):
    """Simulated returns with the generating volatility path."""
    fig, axes = plt.subplots(2, 1, figsize=(9, 5), sharex=True)
    axes[0].plot(labels, y, linewidth=0.5, color="0.3")
    axes[0].set_ylabel("return")
    axes[1].plot(labels, np.exp(np.asarray(x) / 2.0), linewidth=0.8, color="crimson")
    axes[1].set_ylabel("volatility")
    axes[1].set_xlabel("t")
    return _finish(fig, path)


def render_fit(labels, y, x_mean, ess, per_t_logpred, n_particles, path):
    """Three-panel fit report: data vs fitted volatility, ESS, predictive."""
    labels = np.asarray(labels)
    fig, axes = plt.subplots(3, 1, figsize=(9, 7.5), sharex=True)

    axes[0].plot(labels, y, linewidth=0.4, color="0.55", label="returns")
    vol = np.exp(np.asarray(x_mean) / 2.0)
    axes[0].plot(labels, vol, color="crimson", linewidth=1.0, label="fitted vol")
    axes[0].plot(labels, -vol, color="crimson", linewidth=1.0)
    axes[0].legend(loc="upper right", fontsize=8)
    axes[0].set_ylabel("return")

    axes[1].plot(labels, ess, linewidth=0.6, color="navy")
    axes[1].axhline(n_particles / 100.0, color="0.4", linestyle="--", linewidth=0.8)
    axes[1].set_ylabel("ESS")
    axes[1].set_ylim(bottom=0)

    axes[2].plot(labels, np.cumsum(per_t_logpred), linewidth=0.8, color="0.2")
    axes[2].set_ylabel("cum log pred")
    axes[2].set_xlabel("t")
    return _finish(fig, path)


def render_selection(orders, cum_loglik, lpdr_values, path):
    """Per-order evidence bars plus the running class comparison."""
    n_panels = 2 if lpdr_values is not None else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(5 * n_panels, 4))
    if n_panels == 1:
        axes = [axes]

    rel = np.asarray(cum_loglik) - max(cum_loglik)
    pos = np.arange(len(orders))
    axes[0].bar(pos, rel, color="steelblue")
    axes[0].set_xticks(pos, [str(k) for k in orders])
    axes[0].set_xlabel("leverage order")
    axes[0].set_ylabel("cum log marglik (rel. best)")

    if lpdr_values is not None:
        axes[1].plot(lpdr_values, linewidth=0.9, color="darkgreen")
        axes[1].axhline(0.0, color="0.4", linewidth=0.8)
        axes[1].set_xlabel("scored step")
        axes[1].set_ylabel("LPDR")
    return _finish(fig, path)


def render_curve(grid, mean, lo, hi, shock_interval, path):
    """News-impact curve with credible band and observed-shock interval."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.fill_between(grid, lo, hi, color="0.6", **_BAND_KW)
    ax.plot(grid, mean, color="black", linewidth=1.2)
    ax.axhline(0.0, color="0.5", linewidth=0.6)
    if shock_interval is not None:
        for z in shock_interval:
            ax.axvline(z, color="crimson", linestyle=":", linewidth=0.9)
    ax.set_xlabel("standardized shock")
    ax.set_ylabel("leverage response")
    return _finish(fig, path)
