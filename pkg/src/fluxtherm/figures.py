"""Figure rendering for the CLI report paths.

Each report command drops a PNG next to its delimited output. matplotlib is
imported lazily with the Agg backend so library use never touches a
display.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .tpm import TPMRecord


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def conditional_probability_figure(record: TPMRecord, path: Path, title: str,
                                   model=None) -> Path:
    """All 9 curves P(f|i) vs step count; optional model overlay (dashed)."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, record.n_levels, figsize=(4 * record.n_levels, 3.2),
                             sharey=True)
    axes = np.atleast_1d(axes)
    steps = np.asarray(record.times)
    for i, ax in enumerate(axes):
        for f in range(record.n_levels):
            ax.plot(steps, record.cond_probs[:, f, i], marker="o", ms=3,
                    label=f"f={f}")
            if model is not None:
                ax.plot(steps, model[:, f, i], ls="--", lw=1, color="gray")
        ax.set_xlabel("step")
        ax.set_title(f"initial level i={i}")
        ax.set_ylim(-0.05, 1.05)
    axes[0].set_ylabel("P(f|i)")
    axes[-1].legend(loc="best", fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def characteristic_trace_figure(steps, traces: dict[str, np.ndarray], path: Path,
                                title: str) -> Path:
    """Characteristic-function traces vs step count, with the G = 1 line."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for label, trace in traces.items():
        ax.plot(steps, trace, marker="o", ms=3, label=label)
    ax.axhline(1.0, color="black", lw=0.8, ls=":")
    ax.set_xlabel("step")
    ax.set_ylabel("characteristic function")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def field_sweep_figure(gbs, etas, kinds, delta: float, beta: float, path: Path) -> Path:
    """Scale factor over the field sweep; the crossing is marked."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    gbs = np.asarray(gbs, dtype=float)
    etas = np.array([np.nan if e is None else e for e in etas], dtype=float)
    nontrivial = np.array([k == "nontrivial" for k in kinds])
    trivial = np.array([k == "trivial_only" for k in kinds])
    ax.plot(gbs[nontrivial], etas[nontrivial] / beta, "o-", ms=3, label="eta*/beta")
    if trivial.any():
        ax.plot(gbs[trivial], np.zeros(trivial.sum()), "s", ms=3, color="gray",
                label="trivial only")
    ax.axvline(delta, color="red", lw=0.8, ls="--", label="level crossing")
    ax.axhline(2.0, color="black", lw=0.8, ls=":")
    ax.set_xlabel("gamma_e B")
    ax.set_ylabel("eta* / beta")
    ax.set_title(f"field sweep, beta={beta}, delta={delta}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def g_curve_figure(g, eta_star, path: Path, title: str = "stationarity defect") -> Path:
    """g(eta) around its two zeros (or around the origin when only 0 exists)."""
    plt = _pyplot()
    width = 1.5 * abs(eta_star) if eta_star else 1.0
    lo, hi = sorted((-0.4 * width, width if not eta_star or eta_star > 0 else -width))
    grid = np.linspace(lo, hi, 401)
    vals = np.array([g(x) for x in grid])
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(grid, vals)
    ax.axhline(0.0, color="black", lw=0.8, ls=":")
    ax.plot([0.0], [0.0], "ko", ms=4)
    if eta_star:
        ax.plot([eta_star], [0.0], "ro", ms=4, label=f"eta* = {eta_star:.6g}")
        ax.legend(fontsize=8)
    ax.set_xlabel("eta")
    ax.set_ylabel("g(eta)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
