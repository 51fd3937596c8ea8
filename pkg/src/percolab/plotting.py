"""Thin matplotlib helpers that render result tables to PNG files.

Every function takes plain rows (as written to the CSV files) and an output
path, so figures can also be rebuilt from a finished results directory.
"""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_crossing(rows: list[dict], path: Path) -> Path:
    """Crossing probability against ``p`` for every box size."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for n in sorted({r["n"] for r in rows}):
        sel = sorted((r for r in rows if r["n"] == n), key=lambda r: r["p"])
        ax.errorbar([r["p"] for r in sel], [r["p_hat"] for r in sel],
                    yerr=[r["ci95"] for r in sel], marker="o", ms=3, capsize=2, label=f"n={n}")
    ax.axhline(0.5, color="0.6", lw=0.8, ls="--")
    ax.set_xlabel("p")
    ax.set_ylabel("P(white crossing)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_corrlen(rows: list[dict], path: Path, fit=None) -> Path:
    """Log-log correlation length brackets against ``p - 1/2``."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ok = [r for r in rows if r["n_high"] != ""]
    x = np.array([r["p"] - 0.5 for r in ok])
    lo = np.array([r["n_low"] for r in ok], dtype=float)
    hi = np.array([r["n_high"] for r in ok], dtype=float)
    mid = np.array([r["n_hat"] for r in ok], dtype=float)
    if len(ok):
        ax.errorbar(x, mid, yerr=[mid - lo, hi - mid], fmt="o", ms=4, capsize=2,
                    label="certified bracket")
    if fit is not None and len(ok):
        xs = np.geomspace(x.min(), x.max(), 50)
        ax.plot(xs, np.exp(fit.intercept) * xs ** fit.exponent, lw=1,
                label=f"slope {fit.exponent:.2f}, R2 {fit.r_squared:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("p - 1/2")
    ax.set_ylabel("L_eps(p)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_pplus(rows: list[dict], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for eps in sorted({r["epsilon"] for r in rows}):
        sel = sorted((r for r in rows if r["epsilon"] == eps), key=lambda r: r["n"])
        n = np.array([r["n"] for r in sel], dtype=float)
        y = np.array([r["p_hat"] - 0.5 for r in sel])
        err = np.array([0.5 * (r["p_high"] - r["p_low"]) for r in sel])
        ax.errorbar(n, y, yerr=err, marker="o", ms=3, capsize=2, label=f"eps={eps:g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("p+ - 1/2")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_loops(curves: list[np.ndarray], path: Path, center=None, max_loops: int = 400) -> Path:
    """Draw the longest loops of one configuration."""
    fig, ax = plt.subplots(figsize=(5, 5))
    order = sorted(range(len(curves)), key=lambda i: -len(curves[i]))[:max_loops]
    cmap = plt.get_cmap("viridis")
    for k, i in enumerate(order):
        xy = curves[i]
        ax.plot(xy[:, 0], xy[:, 1], lw=0.6, color=cmap(k / max(len(order), 1)))
    if center is not None:
        ax.plot([center[0]], [center[1]], "r+", ms=8)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
    return _save(fig, path)


def plot_events(rows: list[dict], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(rows) + 2), 3.5))
    idx = np.arange(len(rows))
    ax.errorbar(idx, [r["p_hat"] for r in rows], yerr=[r["ci95"] for r in rows],
                fmt="o", capsize=3)
    ax.set_xticks(idx)
    ax.set_xticklabels([r["event"] for r in rows], rotation=45, ha="right", fontsize=8)
    ax.set_ylim(-0.05, 1.05)
    ax.set_ylabel("probability")
    return _save(fig, path)


def plot_sweep(levels: list[dict], cdf_rows: list[dict], thresholds, path: Path) -> Path:
    """Scaled correlation-length brackets per level and largest-loop CDFs."""
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    d = np.array([r["delta"] for r in levels])
    lo = np.array([r["dL_low"] for r in levels])
    hi = np.array([r["dL_high"] for r in levels])
    top = np.where(np.isfinite(hi), hi, max(10 * thresholds[1], np.nanmax(lo) * 2))
    a1.vlines(d, lo, top, lw=3)
    a1.scatter(d[~np.isfinite(hi)], top[~np.isfinite(hi)], marker="^")
    for t in thresholds:
        a1.axhline(t, color="0.6", ls="--", lw=0.8)
    a1.set_xscale("log", base=2)
    a1.set_yscale("log")
    a1.set_xlabel("delta")
    a1.set_ylabel("delta * L_eps")
    for j in sorted({r["level"] for r in cdf_rows}):
        sel = [r for r in cdf_rows if r["level"] == j and r["conditional"] == 1]
        sel = [r for r in sel if not math.isnan(r["P"])]
        if sel:
            a2.step([r["L"] for r in sel], [r["P"] for r in sel], where="post",
                    label=f"delta={levels[j]['delta']:.4g}")
    a2.set_xscale("log")
    a2.set_xlabel("L")
    a2.set_ylabel("P(largest loop <= L | exists)")
    a2.legend(fontsize=8)
    return _save(fig, path)


def plot_matrix(M: np.ndarray, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(M, cmap="magma")
    fig.colorbar(im, ax=ax, label="curve distance")
    return _save(fig, path)
