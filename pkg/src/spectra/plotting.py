"""Static figures written next to the CSV/JSON outputs of the CLI."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    # fixed metadata so reruns produce identical files
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_density(est, path, ceiling=None):
    """Density estimate with its bootstrap band; the ceiling is annotated, not drawn."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.fill_between(
            est.grid, est.values - est.ci_halfwidth, est.values + est.ci_halfwidth,
            color="C0", alpha=0.25, lw=0, label="95% bootstrap band",
        )
        ax.plot(est.grid, est.values, color="C0", label=f"{est.ensemble}, n={est.n}")
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        ax.set_ylim(bottom=0)
        if ceiling is not None:
            ax.text(
                0.02, 0.95, f"peak {est.peak:.4f}  (ceiling {ceiling:.4f})",
                transform=ax.transAxes, va="top",
            )
        ax.legend(loc="upper right")
        return _save(fig, path)


def plot_stieltjes(rows, path, bound=None):
    """``|mean s(E + i y)|`` against E, one curve per y."""
    rows = np.asarray(rows, dtype=float)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for k, y in enumerate(np.unique(rows[:, 1])[::-1]):
            sel = rows[:, 1] == y
            E, s = rows[sel, 0], np.hypot(rows[sel, 2], rows[sel, 3])
            ax.plot(E, s, color=f"C{k}", label=f"Im z = {y:g}")
        ax.set_xlabel("E")
        ax.set_ylabel("|s(z)|")
        if bound is not None:
            ax.text(0.02, 0.95, f"bound {bound:.4f}", transform=ax.transAxes, va="top")
        ax.legend(loc="upper right")
        return _save(fig, path)


def plot_wegner(families, path):
    """``|F(eps, delta)|`` along the eps ladder, one panel per family, against the log-eps and uniform bounds.

    ``families`` is a list of ``(label, checks)`` with ``checks`` as produced by ``WegnerReport.to_dict``.
    """
    with plt.rc_context(RC):
        k = len(families)
        fig, axes = plt.subplots(1, k, figsize=(3.2 * k, 3.0), sharey=True, squeeze=False)
        for ax, (label, checks) in zip(axes[0], families):
            curves, rhs = {}, {}
            for c in checks:
                if c["bound"] == "13":
                    curves.setdefault((c["E"], c["delta"]), []).append((c["eps"], c["lhs"]))
                if c["bound"] in ("11", "13"):
                    rhs.setdefault(c["bound"], {})[c["eps"]] = c["rhs"]
            for pts in curves.values():
                pts = np.array(sorted(pts))
                ax.plot(pts[:, 0], pts[:, 1], color="0.4", alpha=0.6, marker=".", ms=3)
            for bid, color, name in (("11", "C1", "log-eps bound"), ("13", "C3", "uniform bound")):
                if bid in rhs:
                    e = sorted(rhs[bid])
                    ax.plot(e, [rhs[bid][x] for x in e], ls="--", color=color, label=name)
            ax.set_xscale("log")
            ax.set_xlabel("eps")
            ax.set_title(label)
        axes[0, 0].set_ylabel("|F(eps, delta)|")
        axes[0, 0].legend(loc="upper right")
        return _save(fig, path)
