"""Experimental protocol: grading, comparisons, ablations, plots."""

from .experiments import (
    CSV_HEADER,
    AblationGrid,
    ExperimentResult,
    TrialRow,
    evaluate_model,
    format_comparison_table,
    read_rows_csv,
    run_comparison,
    run_data_efficiency,
    run_training_efficiency,
    slice_dataset,
    stage_curves,
    train_variant,
    trial_seed,
    write_rows_csv,
)
from .judge import STAGES, MalformedTraceError, TrialResult, judge
from .plots import plot_experiment
from .resolution import downsample_pixels, downsample_tactile

__all__ = [
    "AblationGrid",
    "CSV_HEADER",
    "ExperimentResult",
    "MalformedTraceError",
    "STAGES",
    "TrialResult",
    "TrialRow",
    "downsample_pixels",
    "downsample_tactile",
    "evaluate_model",
    "format_comparison_table",
    "judge",
    "plot_experiment",
    "read_rows_csv",
    "run_comparison",
    "run_data_efficiency",
    "run_training_efficiency",
    "slice_dataset",
    "stage_curves",
    "train_variant",
    "trial_seed",
    "write_rows_csv",
]
