"""PNG figures drawn from the sweep rows."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 120,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}
COLORS = {"offline": "tab:blue", "safe": "tab:orange", "risky": "tab:green",
          "free-only": "tab:gray", "both-always": "tab:red"}


def _figure(width: float = 6.0):
    fig, ax = plt.subplots(figsize=(width, width * 0.62))
    return fig, ax


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_threshold(rows, path, d_bar: float | None = None) -> Path:
    """Risky threshold against the initial buffer, with the line ``T = D``."""
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        d = np.array([r["D"] for r in rows], float)
        t = np.array([r["T_star"] for r in rows], float)
        ok = np.isfinite(t)
        ax.plot(d[ok], t[ok], "o-", ms=3, label="risky threshold $T^*$")
        ax.plot(d, d, "k--", lw=0.8, label="$T = D$")
        if d_bar is not None and math.isfinite(d_bar):
            ax.axvline(d_bar, color="tab:red", lw=0.8, ls=":", label=r"$\bar D$")
        ax.set_xlabel("initial buffer D (packets)")
        ax.set_ylabel("threshold (packets)")
        ax.legend()
        return _save(fig, path)


def plot_costs(rows, path, r_costly: float | None = None) -> Path:
    """Expected costly-server time per policy: analytic curves and simulated means."""
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        for name in dict.fromkeys(r["policy"] for r in rows):
            sub = [r for r in rows if r["policy"] == name and math.isfinite(r["mc_cost_time"])]
            if not sub:
                continue
            c = COLORS.get(name)
            d = np.array([r["D"] for r in sub])
            an = np.array([r["analytic_cost_time"] for r in sub], float)
            ok = np.isfinite(an)
            bound = any(r["analytic_is_bound"] for r in sub)
            ax.plot(d[ok], an[ok], "--" if bound else "-", color=c, lw=1,
                    label=f"{name} ({'bound' if bound else 'exact'})")
            mc = np.array([r["mc_cost_time"] for r in sub])
            err = np.array([[r["mc_cost_time"] - r["mc_cost_lo"] for r in sub],
                            [r["mc_cost_hi"] - r["mc_cost_time"] for r in sub]])
            ax.errorbar(d, mc, yerr=np.clip(err, 0, None), fmt="o", ms=3, color=c, capsize=2)
        ax.set_xlabel("initial buffer D (packets)")
        ax.set_ylabel("expected costly-server time")
        if r_costly:
            sec = ax.secondary_yaxis("right", functions=(lambda y: y * r_costly, lambda y: y / r_costly))
            sec.set_ylabel("costly packets")
        ax.legend()
        return _save(fig, path)


def plot_hjb(rows, path, switch_curve=None) -> Path:
    """Relative HJB residual over the ``(x, p)`` grid."""
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        x = np.array([r["x"] for r in rows], float)
        p = np.array([r["p"] for r in rows], float)
        rel = np.array([abs(r["residual"]) / max(abs(r["lhs"]), abs(r["rhs"]), 1e-12) for r in rows])
        sc = ax.scatter(x, p, c=np.log10(np.maximum(rel, 1e-16)), s=8, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="log10 relative residual")
        if switch_curve is not None:
            xs, ps = switch_curve
            ax.plot(xs, ps, "r-", lw=1, label="switching curve")
            ax.legend(loc="upper right")
        ax.set_yscale("log")
        ax.set_xlabel("buffer x (packets)")
        ax.set_ylabel("budget p")
        return _save(fig, path)
