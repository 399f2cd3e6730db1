"""PNG figures for a finished run: path, speed against cap, barrier value."""
from __future__ import annotations

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import obstacles_from_meta  # noqa: E402
from .sim import TrajectoryLog  # noqa: E402
from .world import obstacle_state  # noqa: E402


def plot_path(log: TrajectoryLog, path, waypoints=None):
    fig, ax = plt.subplots(figsize=(8, 5))
    t = log.column("t")
    ax.plot(log.column("x"), log.column("y"), color="tab:blue", lw=1.5, label="robot")
    for o in obstacles_from_meta(log.obstacles):
        pos = np.array([obstacle_state(o, ti)[0] for ti in t]).reshape(-1, 2)
        if np.ptp(pos, axis=0).max() > 1e-9:
            ax.plot(pos[:, 0], pos[:, 1], color="tab:red", lw=0.6, alpha=0.5)
        ax.add_patch(plt.Circle(pos[-1], o.radius, color="tab:red", alpha=0.6))
    for name, p in (waypoints or {}).items():
        ax.plot(*p, marker="*", color="tab:green", ms=10)
        ax.annotate(name, p, textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("Robot trajectory")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_speed(log: TrajectoryLog, path):
    fig, ax = plt.subplots(figsize=(8, 3.5))
    t = log.column("t")
    ax.plot(t, log.column("speed"), lw=1.2, label="speed")
    ax.step(t, log.column("vmax"), where="post", color="k", ls="--", lw=1, label="v_max")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("m/s")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_barrier(log: TrajectoryLog, path):
    fig, ax = plt.subplots(figsize=(8, 3.5))
    t = log.column("t")
    b = log.column("b")
    ok = np.isfinite(b)
    ax.plot(t[ok], b[ok], lw=1.2)
    ax.axhline(0, color="k", lw=0.8)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("b(x, t)")
    ax.set_title("Composite barrier value")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_all(log: TrajectoryLog, outdir, waypoints=None) -> List[Path]:
    outdir = Path(outdir)
    files = [outdir / "path.png", outdir / "speed.png", outdir / "barrier.png"]
    plot_path(log, files[0], waypoints)
    plot_speed(log, files[1])
    plot_barrier(log, files[2])
    return files
