"""Figure rendering for trajectory CSV data (file output only)."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = ["render_error_figures"]


def render_error_figures(table, out_dir, stem="trajectory"):
    """Render tracking- and estimation-error figures as PNG files.

    ``table`` is a :class:`ddsync.fileio.TrajectoryTable`.  Returns the
    list of written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t = table.t
    written = []

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for agent in table.agents:
        comps = table.e[agent]
        for k in range(comps.shape[0]):
            label = f"agent {agent}" if k == 0 else None
            ax.plot(t, comps[k], lw=1.0, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("output tracking error")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = out_dir / f"{stem}_tracking_error.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(2, 1, figsize=(7.0, 6.0), sharex=True)
    for agent in sorted(table.delta):
        axes[0].plot(t, table.delta[agent], lw=1.0, label=f"agent {agent}")
    axes[0].set_ylabel("estimation error (max norm)")
    axes[0].legend(loc="best", fontsize=8)
    axes[0].grid(True, alpha=0.3)
    for agent in sorted(table.eps):
        axes[1].plot(t, table.eps[agent], lw=1.0, label=f"agent {agent}")
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("state tracking error (max norm)")
    axes[1].grid(True, alpha=0.3)
    fig.tight_layout()
    path = out_dir / f"{stem}_estimation_error.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    return written
