"""Static plot emission for the ablation experiments."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..simworld import TaskId  # noqa: E402
from .experiments import ExperimentResult, stage_curves  # noqa: E402


def plot_experiment(result: ExperimentResult, experiment: str, task: TaskId | str,
                    out_dir: str | Path, x_label: str = "fraction") -> Path:
    """Write `<experiment>_<task>.png`: per-stage curves, one line per variant."""
    task = TaskId(task)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    variants = sorted({r.variant for r in result.rows if r.task == task.value})

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5), sharey=True)
    stage_names = None
    for variant in variants:
        curves = stage_curves(result, task, variant)
        if stage_names is None:
            stage_names = list(curves.keys())
        for ax, stage in zip(axes, stage_names):
            xs = [p[0] for p in curves[stage]]
            ys = [p[1] for p in curves[stage]]
            ax.plot(xs, ys, marker="o", label=variant)
            ax.set_title(stage)
            ax.set_xlabel(x_label)
            ax.set_ylim(-0.05, 1.05)
    axes[0].set_ylabel("success rate")
    axes[-1].legend(fontsize=7)
    fig.suptitle(f"{experiment}: {task.value}")
    fig.tight_layout()
    path = out_dir / f"{experiment}_{task.value}.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
