"""Planar visuo-tactile manipulation simulator and scripted demonstrator."""

from .collect import ExpertRollout, collect_episode, run_expert, sample_initial_state
from .dynamics import squeeze_force, step, task_complete
from .expert import scripted_expert
from .rendering import render_tactile, render_vision
from .types import (
    Action,
    ActionBoundsError,
    Finger,
    TactileImage,
    TaskId,
    VisionImage,
    WorldState,
    wrap_angle,
)

__all__ = [
    "Action",
    "ActionBoundsError",
    "ExpertRollout",
    "Finger",
    "TactileImage",
    "TaskId",
    "VisionImage",
    "WorldState",
    "collect_episode",
    "render_tactile",
    "render_vision",
    "run_expert",
    "sample_initial_state",
    "scripted_expert",
    "squeeze_force",
    "step",
    "task_complete",
    "wrap_angle",
]
