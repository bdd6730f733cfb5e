"""Deterministic SVG plots of trailer trajectories."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp, so repeated runs give identical bytes
_RC = {"svg.hashsalt": "kr-steer", "svg.fonttype": "path"}
_META = {"Date": None, "Creator": None}


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def path_plot(traj, path, title: str = ""):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.plot(traj.states[:, 0], traj.states[:, 1], lw=1.2)
        ax.plot(*traj.states[0, :2], "o", label="start")
        ax.plot(*traj.states[-1, :2], "s", label="end")
        ax.set_xlabel("xi1")
        ax.set_ylabel("xi2")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(loc="best")
        if title:
            ax.set_title(title)
        _save(fig, Path(path))


def angle_plot(traj, path, title: str = ""):
    angles = np.unwrap(traj.states[:, 2:], axis=0)
    k = angles.shape[1]
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(k, 1, figsize=(6, 1.8 * k), sharex=True)
        axes = np.atleast_1d(axes)
        for i, ax in enumerate(axes):
            ax.plot(traj.times, angles[:, i], lw=1.0)
            ax.set_ylabel(f"theta{i}")
        axes[-1].set_xlabel("t")
        if title:
            axes[0].set_title(title)
        fig.tight_layout()
        _save(fig, Path(path))
