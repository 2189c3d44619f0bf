"""SVG scatter of latent trajectories read back from a JSON-lines dump."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def read_dump(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def plot_latent_trajectories(dump_path: str | Path, svg_path: str | Path | None = None, k: int | None = None) -> Path:
    """z₁ vs z₂ coloured by step, with a star at each subgoal (one star per change of g).

    Returns:
        Path of the written SVG (next to the dump by default).
    """
    rows = read_dump(dump_path)
    svg_path = Path(svg_path) if svg_path is not None else Path(dump_path).with_suffix(".svg")
    fig, ax = plt.subplots(figsize=(6, 6))
    if rows:
        z = np.array([r["z"] for r in rows], dtype=float)
        steps = np.array([r["step"] for r in rows])
        if z.shape[1] < 2:
            z = np.column_stack([z[:, 0], np.zeros(len(z))])
        points = ax.scatter(z[:, 0], z[:, 1], c=steps, cmap="viridis", s=8)
        fig.colorbar(points, ax=ax, label="step")

        goals, goal_steps, previous = [], [], None
        for r in rows:
            key = (r["episode"], tuple(r["g"]))
            if key != previous and (k is None or r["step"] % k == 0):
                goals.append(r["g"][:2] if len(r["g"]) >= 2 else [r["g"][0], 0.0])
                goal_steps.append(r["step"])
            previous = key
        if goals:
            goals = np.array(goals, dtype=float)
            ax.scatter(goals[:, 0], goals[:, 1], c=goal_steps, cmap="viridis", marker="*", s=180,
                       edgecolors="black", linewidths=0.6, label="subgoals")
            ax.legend(loc="best")
    ax.set_xlabel("z₁")
    ax.set_ylabel("z₂")
    ax.set_title("Latent trajectories")
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
    return svg_path
