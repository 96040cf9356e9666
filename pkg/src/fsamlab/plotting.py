"""Matplotlib figures written next to the CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}

MODE_COLORS = {"base": "#4c72b0", "sam": "#dd8452", "fsam": "#55a868"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_metrics(rows, path, title=None):
    """Loss and metric curves for one run."""
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
        steps = [r.step for r in rows]
        ax1.plot(steps, [r.train_loss for r in rows], label="train")
        ax1.plot(steps, [r.eval_loss for r in rows], label="eval")
        ax1.set_yscale("log")
        ax1.set_xlabel("step")
        ax1.set_ylabel("loss")
        ax1.legend()
        ax2.plot(steps, [r.train_metric for r in rows], label="train")
        ax2.plot(steps, [r.eval_metric for r in rows], label="eval")
        ax2.set_xlabel("step")
        ax2.set_ylabel("metric")
        updates = [r.step for r in rows if r.mask_updated]
        for s in updates:
            ax2.axvline(s, color="0.85", lw=0.6, zorder=0)
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_interp(curves: dict, path):
    """1D interpolation curves, one line per label."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, pts in curves.items():
            a, loss = zip(*pts)
            ax.plot(a, loss, label=label, color=MODE_COLORS.get(label))
        ax.set_xlabel(r"$\alpha$")
        ax.set_ylabel("loss")
        if len(curves) > 1:
            ax.legend()
        return _save(fig, path)


def plot_surface(coords, losses, path, levels=30):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 4.2))
        X, Y = np.meshgrid(coords, coords, indexing="ij")
        cs = ax.contourf(X, Y, losses, levels=levels, cmap="viridis")
        ax.contour(X, Y, losses, levels=levels, colors="k", linewidths=0.3)
        fig.colorbar(cs, ax=ax, label="loss")
        ax.set_xlabel("direction 1")
        ax.set_ylabel("direction 2")
        ax.set_aspect("equal")
        return _save(fig, path)


def plot_sweep(rows, path):
    """Metric against subsampling rate, one errorbar series per mode."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for mode in dict.fromkeys(r["mode"] for r in rows):
            sel = [r for r in rows if r["mode"] == mode]
            ax.errorbar([r["rate"] for r in sel], [r["mean_metric"] for r in sel],
                        yerr=[r["std_metric"] for r in sel], label=mode, capsize=2,
                        marker="o", ms=3, color=MODE_COLORS.get(mode))
        ax.set_xlabel("training subsample rate")
        ax.set_ylabel("eval metric")
        ax.legend()
        return _save(fig, path)


def plot_compare(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        names = [r["name"] for r in rows]
        ax.bar(names, [r["mean_metric"] for r in rows], yerr=[r["std_metric"] for r in rows],
               color=[MODE_COLORS.get(r["mode"], "0.5") for r in rows], capsize=3)
        ax.set_ylabel("eval metric")
        ax.tick_params(axis="x", rotation=30)
        return _save(fig, path)


def plot_rate(rows, slope, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        T = np.array([r["T"] for r in rows], dtype=float)
        M = np.array([r["mean_sq_grad_norm"] for r in rows])
        ax.loglog(T, M, "o-", label=f"measured (slope {slope:.3f})")
        ax.loglog(T, M[0] * np.sqrt(T[0] / T), "--", color="0.5", label="slope -1/2")
        ax.set_xlabel("T")
        ax.set_ylabel(r"$\frac{1}{T}\sum_t \|\nabla f(x_t)\|^2$")
        ax.legend()
        return _save(fig, path)
