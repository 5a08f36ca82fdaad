"""Experiment protocol: paired-trial comparisons and efficiency ablations.

Every cell evaluates its model on the same per-trial world seeds, so variant
columns are directly comparable. Training seeds derive canonically from
(root seed, task, variant), which makes a 100%-fraction ablation cell train
the identical model as the corresponding comparison cell.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import EvalConfig, PolicyConfig, SimWorldConfig
from ..deploy import LatencyConfig, PolicyPlanner, run_rollout
from ..episodes import AlignedEpisode
from ..errors import DataError, UsageError
from ..policy.conditioning import Variant
from ..policy.train import PolicyModel, load_policy_checkpoint, train_policy
from ..pretrain.model import ReprModel
from ..seeding import child_rng, child_seed
from ..simworld import TaskId
from .judge import STAGES, TrialResult, judge

logger = logging.getLogger(__name__)

CSV_HEADER = ("task", "variant", "fraction_or_epoch", "seed",
              "stage_1", "stage_2", "overall", "ticks")


@dataclass
class TrialRow:
    task: str
    variant: str
    fraction_or_epoch: str
    seed: int
    stage_1: bool
    stage_2: bool
    overall: bool
    ticks: int

    @classmethod
    def from_result(cls, result: TrialResult, fraction_or_epoch: str = "") -> "TrialRow":
        s1, s2 = result.stages
        return cls(task=result.task_id, variant=result.variant,
                   fraction_or_epoch=fraction_or_epoch, seed=result.seed,
                   stage_1=s1, stage_2=s2, overall=result.overall, ticks=result.ticks_used)


@dataclass
class AblationGrid:
    data_fractions: tuple[float, ...] = (0.25, 0.5, 1.0)
    epoch_checkpoints: tuple[int, ...] = (10, 20, 40, 60)
    variants: tuple[Variant, ...] = (Variant.VISUOTACTILE_PRETRAINED,
                                     Variant.VISUOTACTILE_SCRATCH)
    trials_per_cell: int = 20
    shuffle_seed: int = 0

    def __post_init__(self):
        if any(not 0.0 < f <= 1.0 for f in self.data_fractions):
            raise UsageError(f"data fractions must lie in (0, 1]: {self.data_fractions}")
        if self.trials_per_cell < 1:
            raise UsageError("trials_per_cell must be >= 1")


def train_variant(task_id: TaskId | str, episodes: list[AlignedEpisode],
                  repr_model: ReprModel, variant: Variant,
                  policy_cfg: PolicyConfig, root_seed: int,
                  out_dir: str | Path | None = None,
                  checkpoint_epochs: tuple[int, ...] = ()) -> PolicyModel:
    """Train one cell with the canonical (root, task, variant) seed derivation."""
    task_id = TaskId(task_id)
    return train_policy(episodes, repr_model, variant, policy_cfg,
                        seed=child_seed(root_seed, "train", task_id.value, variant.value),
                        out_dir=out_dir, checkpoint_epochs=checkpoint_epochs)


def trial_seed(root_seed: int, task_id: TaskId | str, trial: int) -> int:
    """World seed for one paired trial; identical across variants."""
    return child_seed(root_seed, "trial", TaskId(task_id).value, trial)


def evaluate_model(model: PolicyModel, task_id: TaskId | str, n_trials: int,
                   root_seed: int, variant_label: str = "",
                   fraction_or_epoch: str = "",
                   latency: LatencyConfig | None = None,
                   sim_cfg: SimWorldConfig | None = None,
                   eval_cfg: EvalConfig | None = None) -> list[TrialRow]:
    """Paired rollouts + grading for one model on one task."""
    task_id = TaskId(task_id)
    eval_cfg = eval_cfg or EvalConfig()
    latency = latency or LatencyConfig(inference_latency=eval_cfg.inference_latency,
                                       perception_latency=eval_cfg.perception_latency)
    variant_label = variant_label or model.variant.value
    rows = []
    for i in range(n_trials):
        seed = trial_seed(root_seed, task_id, i)
        planner = PolicyPlanner(model, seed=seed)
        trace = run_rollout(planner, task_id, latency, seed=seed,
                            max_ticks=eval_cfg.max_ticks, sim_cfg=sim_cfg)
        result = judge(trace, task_id, variant=variant_label,
                       position_tolerance=eval_cfg.position_tolerance,
                       angle_tolerance_deg=eval_cfg.angle_tolerance_deg)
        rows.append(TrialRow.from_result(result, fraction_or_epoch))
    return rows


@dataclass
class ExperimentResult:
    rows: list[TrialRow] = field(default_factory=list)

    def success_rate(self, task: TaskId | str, variant: str,
                     fraction_or_epoch: str | None = None,
                     stage: str = "overall") -> float:
        task = TaskId(task).value
        hits = [r for r in self.rows if r.task == task and r.variant == variant
                and (fraction_or_epoch is None or r.fraction_or_epoch == fraction_or_epoch)]
        if not hits:
            raise DataError(f"no trials for ({task}, {variant}, {fraction_or_epoch})")
        return float(np.mean([getattr(r, stage) for r in hits]))


def run_comparison(models: dict[tuple[str, str], PolicyModel],
                   tasks: list[TaskId | str], n_trials: int = 20, root_seed: int = 0,
                   latency: LatencyConfig | None = None,
                   sim_cfg: SimWorldConfig | None = None,
                   eval_cfg: EvalConfig | None = None) -> ExperimentResult:
    """Evaluate every (task, variant) model on paired trials.

    `models` is keyed by (task value, variant value).
    """
    result = ExperimentResult()
    for task in tasks:
        task = TaskId(task)
        for (task_key, variant_key), model in models.items():
            if task_key != task.value:
                continue
            if model is None:
                raise DataError(f"missing model for ({task_key}, {variant_key})")
            result.rows.extend(evaluate_model(
                model, task, n_trials, root_seed, variant_label=variant_key,
                latency=latency, sim_cfg=sim_cfg, eval_cfg=eval_cfg))
    return result


def slice_dataset(episodes: list[AlignedEpisode], fraction: float,
                  shuffle_seed: int = 0) -> list[AlignedEpisode]:
    """Reproducible nested subsets: fixed shuffle, then a prefix."""
    if not 0.0 < fraction <= 1.0:
        raise UsageError(f"fraction {fraction} outside (0, 1]")
    order = child_rng(shuffle_seed, "dataset-shuffle").permutation(len(episodes))
    count = math.ceil(fraction * len(episodes))
    if count == 0:
        raise DataError(f"fraction {fraction} selects no episodes")
    return [episodes[i] for i in order[:count]]


def run_data_efficiency(task_id: TaskId | str, episodes: list[AlignedEpisode],
                        repr_model: ReprModel, grid: AblationGrid,
                        policy_cfg: PolicyConfig, root_seed: int = 0,
                        latency: LatencyConfig | None = None,
                        sim_cfg: SimWorldConfig | None = None,
                        eval_cfg: EvalConfig | None = None,
                        full_models: dict[str, PolicyModel] | None = None
                        ) -> ExperimentResult:
    """Train and evaluate each (fraction, variant) cell.

    Models for fraction 1.0 may be passed in `full_models` (keyed by variant
    value); seed derivation makes them identical to freshly trained ones.
    """
    task_id = TaskId(task_id)
    result = ExperimentResult()
    for fraction in grid.data_fractions:
        subset = slice_dataset(episodes, fraction, grid.shuffle_seed)
        logger.info("data-efficiency %s fraction %.2f: %d episodes",
                    task_id.value, fraction, len(subset))
        for variant in grid.variants:
            variant = Variant(variant)
            if fraction == 1.0 and full_models and variant.value in full_models:
                model = full_models[variant.value]
            else:
                model = train_variant(task_id, subset, repr_model, variant,
                                      policy_cfg, root_seed)
            result.rows.extend(evaluate_model(
                model, task_id, grid.trials_per_cell, root_seed,
                variant_label=variant.value, fraction_or_epoch=f"{fraction:g}",
                latency=latency, sim_cfg=sim_cfg, eval_cfg=eval_cfg))
    return result


def run_training_efficiency(task_id: TaskId | str, episodes: list[AlignedEpisode],
                            repr_model: ReprModel, grid: AblationGrid,
                            policy_cfg: PolicyConfig, work_dir: str | Path,
                            root_seed: int = 0,
                            latency: LatencyConfig | None = None,
                            sim_cfg: SimWorldConfig | None = None,
                            eval_cfg: EvalConfig | None = None) -> ExperimentResult:
    """Evaluate epoch-indexed checkpoints of one training run per variant."""
    import dataclasses as dc

    task_id = TaskId(task_id)
    work_dir = Path(work_dir)
    checkpoints = tuple(sorted(grid.epoch_checkpoints))
    cfg = dc.replace(policy_cfg, epochs=max(checkpoints))
    result = ExperimentResult()
    for variant in grid.variants:
        variant = Variant(variant)
        train_variant(task_id, episodes, repr_model, variant, cfg, root_seed,
                      out_dir=work_dir, checkpoint_epochs=checkpoints)
        for epoch in checkpoints:
            path = work_dir / f"policy_{variant.value}_epoch{epoch:03d}.ckpt"
            model = load_policy_checkpoint(path, unet_channels=cfg.unet_channels)
            result.rows.extend(evaluate_model(
                model, task_id, grid.trials_per_cell, root_seed,
                variant_label=variant.value, fraction_or_epoch=str(epoch),
                latency=latency, sim_cfg=sim_cfg, eval_cfg=eval_cfg))
    return result


def write_rows_csv(rows: list[TrialRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([r.task, r.variant, r.fraction_or_epoch, r.seed,
                             int(r.stage_1), int(r.stage_2), int(r.overall), r.ticks])
    return path


def read_rows_csv(path: str | Path) -> list[TrialRow]:
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(TrialRow(
                task=rec["task"], variant=rec["variant"],
                fraction_or_epoch=rec["fraction_or_epoch"], seed=int(rec["seed"]),
                stage_1=bool(int(rec["stage_1"])), stage_2=bool(int(rec["stage_2"])),
                overall=bool(int(rec["overall"])), ticks=int(rec["ticks"])))
    return rows


def format_comparison_table(result: ExperimentResult, tasks: list[TaskId | str],
                            variants: list[str]) -> str:
    """Success-rate table, tasks as rows, variants as columns, 2 decimals."""
    width = max(len(v) for v in variants) + 2
    header = f"{'Task':<24}" + "".join(f"{v:>{width}}" for v in variants)
    lines = [header, "-" * len(header)]
    for task in tasks:
        task = TaskId(task)
        cells = []
        for variant in variants:
            rate = result.success_rate(task, variant)
            cells.append(f"{rate:>{width}.2f}")
        lines.append(f"{task.value:<24}" + "".join(cells))
    return "\n".join(lines)


def stage_curves(result: ExperimentResult, task: TaskId | str, variant: str
                 ) -> dict[str, list[tuple[float, float]]]:
    """Per-stage success rates keyed by stage name, as (x, rate) points."""
    task = TaskId(task)
    keys = {r.fraction_or_epoch for r in result.rows
            if r.task == task.value and r.variant == variant}
    ordered = sorted(keys, key=lambda k: float(k) if k else 0.0)
    names = STAGES[task]
    curves: dict[str, list[tuple[float, float]]] = {
        names[0]: [], names[1]: [], "overall": []}
    for key in ordered:
        x = float(key) if key else 0.0
        curves[names[0]].append((x, result.success_rate(task, variant, key, "stage_1")))
        curves[names[1]].append((x, result.success_rate(task, variant, key, "stage_2")))
        curves["overall"].append((x, result.success_rate(task, variant, key, "overall")))
    return curves
